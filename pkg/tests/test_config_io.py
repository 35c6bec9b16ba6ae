import numpy as np
import pytest

from perbetti.config import ConfigError, load_config, parse_config
from perbetti.filtration import ComplexKind
from perbetti.geometry import PointCloud
from perbetti.io import CloudFormatError, load_cloud, load_hidden_path, save_cloud, save_hidden_path
from perbetti.samplers import BlockedChainProcess, DelayEmbeddingProcess, DensityChainProcess, LatticeFieldProcess

CHAIN = {
    "process": {
        "kind": "blocked_chain", "p": 2,
        "density": {"grid": 2, "weights": [1.6, 0.8, 0.8, 0.8]},
        "hidden": {"stay": 0.6},
    },
    "complex": {"kind": "rips", "max_dim": 2},
    "queries": [{"q": 0, "r": 0.0, "s": 0.5}, {"q": 1, "r": 0.8, "s": 1.0}],
    "experiment": {"type": "compare", "n_grid": [100, 200], "replications": 10, "seed": 7},
}


def _with(base, path, value):
    import copy

    cfg = copy.deepcopy(base)
    node = cfg
    keys = path.split(".")
    for k in keys[:-1]:
        node = node[k]
    node[keys[-1]] = value
    return cfg


def _error_path(data):
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    return exc.value.path


def test_parse_chain_config():
    cfg = parse_config(CHAIN)
    assert isinstance(cfg.process, BlockedChainProcess)
    assert np.allclose(cfg.process.hidden.initial, [0.4, 0.2, 0.2, 0.2])
    assert cfg.complex.kind is ComplexKind.RIPS and len(cfg.queries) == 2
    assert cfg.seed == 7 and cfg.workers == 1


@pytest.mark.parametrize("path,value,expected", [
    ("process.density.weights", [1.0, 1.0, 1.0], "process.density.weights"),
    ("process.hidden.stay", 1.5, "process.hidden.stay"),
    ("process.kind", "gaussian", "process.kind"),
    ("complex.kind", "alpha", "complex.kind"),
    ("complex.max_dim", 1, "queries[1].q"),
    ("experiment.n_grid", [200, 100], "experiment.n_grid"),
    ("experiment.type", "nope", "experiment.type"),
    ("experiment.replications", 0, "experiment.replications"),
])
def test_error_paths(path, value, expected):
    assert _error_path(_with(CHAIN, path, value)) == expected


def test_bad_partition_names_blocks():
    data = _with(CHAIN, "process.density", {"lows": [[0.0, 0.0], [0.5, 0.0]], "highs": [[0.5, 1.0], [1.0, 0.8]],
                                            "weights": [1.0, 1.0]})
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert exc.value.path == "process.density.blocks"


def test_bad_query_rejected():
    data = _with(CHAIN, "queries", [{"q": 0, "r": 1.0, "s": 0.5}])
    assert _error_path(data) == "queries[0]"


def test_other_process_kinds():
    delay = {"process": {"kind": "delay_embedding", "density": {"grid": 2, "weights": [1.2, 0.8]},
                         "hidden": {"stay": 0.3}, "lags": [1, 3]}}
    assert isinstance(parse_config(delay).process, DelayEmbeddingProcess)
    assert _error_path(_with(delay, "process.lags", [3, 1])) == "process.lags"
    dens = {"process": {"kind": "density_chain", "p": 2, "chain": {"amplitude": 0.5, "order": 1}}}
    assert isinstance(parse_config(dens).process, DensityChainProcess)
    lat = {"process": {"kind": "lattice_field", "density": {"grid": 2, "weights": [1.6, 0.8, 0.8, 0.8]},
                       "lattice": {"axis1": {"stay": 0.6}, "axis2": {"stay": 0.6}, "weight": 0.5}}}
    assert isinstance(parse_config(lat).process, LatticeFieldProcess)
    assert _error_path(_with(lat, "process.d", 3)) == "process.d"


def test_cech_degree_limited_by_dimension():
    data = _with(CHAIN, "complex", {"kind": "cech", "max_dim": 3})
    data["queries"] = [{"q": 2, "r": 0.1, "s": 0.2}]
    assert _error_path(data) == "queries[0].q"


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[process\nkind = 1")
    with pytest.raises(ConfigError, match="invalid TOML"):
        load_config(bad)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")
    good = tmp_path / "good.toml"
    good.write_text('[process]\nkind = "binomial"\np = 3\n')
    assert load_config(good).process.p == 3


def test_cloud_roundtrip(tmp_path, rng):
    cloud = PointCloud(rng.random((7, 3)))
    save_cloud(cloud, tmp_path / "c.csv")
    back = load_cloud(tmp_path / "c.csv")
    assert np.array_equal(back.points, cloud.points)


def test_cloud_headerless_and_empty(tmp_path):
    (tmp_path / "a.csv").write_text("0.1,0.2\n0.3,0.4\n")
    assert load_cloud(tmp_path / "a.csv").points.shape == (2, 2)
    (tmp_path / "e.csv").write_text("x0,x1,x2\n")
    assert load_cloud(tmp_path / "e.csv").points.shape == (0, 3)
    (tmp_path / "z.csv").write_text("")
    with pytest.raises(CloudFormatError):
        load_cloud(tmp_path / "z.csv")


def test_cloud_rejections(tmp_path):
    (tmp_path / "arity.csv").write_text("x0,x1\n0.1,0.2\n0.3\n")
    with pytest.raises(CloudFormatError, match="row 2"):
        load_cloud(tmp_path / "arity.csv")
    (tmp_path / "text.csv").write_text("0.1,0.2\n0.3,abc\n")
    with pytest.raises(CloudFormatError, match="non-numeric"):
        load_cloud(tmp_path / "text.csv")
    (tmp_path / "out.csv").write_text("0.1,0.2\n1.5,-2\n")
    with pytest.raises(CloudFormatError, match="outside"):
        load_cloud(tmp_path / "out.csv")
    pts = load_cloud(tmp_path / "out.csv", allow_outside_cube=True).points
    assert pts.tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_hidden_sidecar(tmp_path):
    save_hidden_path([0, 3, 1], tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text() == "block\n0\n3\n1\n"
    assert load_hidden_path(tmp_path / "h.csv").tolist() == [0, 3, 1]
    save_hidden_path([2, 1], tmp_path / "l.csv", sites=[[1, 1], [2, 1]])
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == "u1,u2,block"
    assert load_hidden_path(tmp_path / "l.csv").tolist() == [2, 1]
