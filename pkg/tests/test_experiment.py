import pytest

from triadic.experiment import (
    ConfigError,
    ExperimentConfig,
    crafted_state,
    geometric_checkpoints,
    read_config_file,
    resolve_config,
    simulate_seed,
)
from triadic.params import ModelParams


def test_geometric_checkpoints():
    cps = geometric_checkpoints(10 ** 6)
    assert cps[0] == 1000 and cps[-1] == 10 ** 6 and len(cps) == 25
    assert cps[8] == 10 ** 4 and cps[16] == 10 ** 5
    ratios = [b / a for a, b in zip(cps, cps[1:])]
    assert all(abs(r - 10 ** (1 / 8)) < 1e-3 for r in ratios)
    assert geometric_checkpoints(10) == [10]
    assert geometric_checkpoints(1500) == [1000, 1334, 1500]


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("# demo\np = 0.5\nq = 1/2\nr=0.25\nseeds = 0:3, 9\nw-max = 10\n")
    values = read_config_file(path)
    cfg = resolve_config(values, {"r": "0.75", "steps": "500", "q": None})
    assert cfg.params == ModelParams("1/2", "1/2", "3/4")
    assert cfg.seeds == (0, 1, 2, 3, 9)
    assert cfg.w_max == 10 and cfg.d_max == 20
    assert cfg.steps == 500


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense line\n")
    with pytest.raises(ConfigError):
        read_config_file(bad)
    bad.write_text("colour = red\n")
    with pytest.raises(ConfigError):
        read_config_file(bad)
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "missing.cfg")
    for kw in ({"w_max": "0"}, {"steps": "0"}, {"p": "0"}, {"seeds": ""}, {"steps": "x"},
               {"checkpoints": "5,3"}, {"steps": "10", "checkpoints": "20"}, {"tv_tol": "-1"}):
        with pytest.raises(ConfigError):
            resolve_config(overrides=kw)


def test_digest_ignores_location():
    a = ExperimentConfig(out="x", jobs=1)
    b = ExperimentConfig(out="y", jobs=4)
    assert a.digest() == b.digest()
    assert a.digest() != ExperimentConfig(steps=5).digest()


def test_simulate_seed_records_checkpoints():
    cfg = resolve_config(overrides={"steps": "10", "checkpoints": "10", "snapshot": "false"})
    res = simulate_seed(cfg, 0)
    assert len(res.rows) == 1
    assert res.header[:2] == ["n", "V"]
    assert res.rows[0][0] == 10 and 3 <= res.rows[0][1] <= 13
    assert res.snapshot is None


def test_crafted_state_shape():
    s = crafted_state(ModelParams("0.5", "0.5", "0.5"))
    assert s.num_vertices == 6
    weights = s.weights()
    assert len(set(weights.tolist())) > 1 and len(set(s.degrees().tolist())) > 1
