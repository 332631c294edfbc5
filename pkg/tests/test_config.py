import pytest

from kinkfield import config
from kinkfield.errors import ValidationError

BASE = {"job": "ground", "model": {"mu0_sq": 1.0, "lambda0": 0.0, "L": 4, "d": 4}}


def test_defaults_fill_missing_sections():
    cfg = config.resolve(BASE, environ={})
    assert cfg["solver"]["chi"] == config.DEFAULTS["solver"]["chi"]
    assert cfg["model"]["boundary"] == "PBC"
    assert cfg["seed"] == 0 and cfg["threads"] == 1


def test_precedence_file_env_flag():
    raw = dict(BASE, seed=3)
    env = {"KINKFIELD_SEED": "5", "KINKFIELD_SOLVER__CHI": "12", "KINKFIELD_NUMBA": "0"}
    assert config.resolve(raw, environ=env)["seed"] == 5
    assert config.resolve(raw, environ=env)["solver"]["chi"] == 12
    assert config.resolve(raw, {"seed": 9}, environ=env)["seed"] == 9
    assert "numba" not in config.resolve(raw, environ=env)


@pytest.mark.parametrize("patch, field", [
    ({"job": "fly"}, "job"),
    ({"model": {"mu0_sq": 1.0, "lambda0": 0.0, "L": 4}}, "model.d"),
    ({"model": dict(BASE["model"], boundary="APBC")}, "model.boundary"),
    ({"solver": {"chi": 0}}, "solver.chi"),
    ({"solver": {"local_solver": "magic"}}, "solver.local_solver"),
    ({"correlator": {"r_max": 1}}, "correlator.r_max"),
    ({"threads": 0}, "threads"),
    ({"seed": -1}, "seed"),
    ({"job": "sweep", "sweep": {}}, "sweep"),
    ({"job": "sweep", "sweep": {"mu0_sq": []}}, "sweep.mu0_sq"),
    ({"model": dict(BASE["model"], d=1)}, "model"),
])
def test_invalid_fields_named(patch, field):
    with pytest.raises(config.ConfigError) as info:
        config.resolve(dict(BASE, **patch), environ={})
    assert info.value.field == field
    assert isinstance(info.value, ValidationError)


def test_sweep_points_last_axis_fastest():
    raw = dict(BASE, job="sweep", sweep={"mu0_sq": [1.0, 2.0], "chi": [2, 3]})
    pts = config.points(config.resolve(raw, environ={}))
    assert [(p.mu0_sq, chi) for p, chi in pts] == [(1.0, 2), (1.0, 3), (2.0, 2), (2.0, 3)]


def test_content_hash_is_git_blob_hash():
    import hashlib
    text = config.canonical_json({"b": 1, "a": [1, 2]})
    assert text == '{"a":[1,2],"b":1}'
    want = hashlib.sha1(b"blob 17\0" + text.encode()).hexdigest()
    assert config.content_hash({"a": [1, 2], "b": 1}) == want


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(config.ConfigError) as info:
        config.load(str(bad))
    assert info.value.field == "config"
    with pytest.raises(config.ConfigError):
        config.load(str(tmp_path / "missing.json"))
