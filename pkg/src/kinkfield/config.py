"""Run configuration: defaults, environment overrides and validation.

A config is a JSON document. Every section is optional except ``job`` and
``model``::

    {
      "job": "mass",
      "model": {"mu0_sq": -0.6, "lambda0": 2.0, "L": 32, "d": 8, "boundary": "PBC"},
      "solver": {"chi": 16, "local_solver": "iterative"},
      "umps": {"chi": 16},
      "correlator": {"r_max": 30},
      "mass": {"rel_tol": 0.01, "min_window": 3},
      "sweep": {"job": "mass", "mu0_sq": [-0.6, -0.65]},
      "seed": 0
    }

Environment variables ``KINKFIELD_SEED``, ``KINKFIELD_THREADS`` and
``KINKFIELD_OUT`` override the matching top-level keys;
``KINKFIELD_<SECTION>__<KEY>`` overrides a nested key (value parsed as
JSON when possible).
"""
import copy
import hashlib
import json
import os

from .errors import ValidationError
from .model import BOUNDARIES, ModelSpec, validate

JOBS = ("ground", "kink", "correlator", "mass", "sweep", "oracle")
SWEEP_AXES = ("mu0_sq", "lambda0", "chi", "d", "L")

DEFAULTS = {
    "job": None,
    "model": {"boundary": "PBC"},
    "solver": {
        "method": "dmrg",
        "chi": 8,
        "max_sweeps": 200,
        "min_sweeps": 2,
        "energy_tol": 1e-9,
        "metric_regularization": 1e-10,
        "local_solver": "dense",
        "lanczos_tol": 1e-8,
        "init": "random",
        "noise": 1e-4,
    },
    "umps": {"chi": None, "tol": 1e-8, "max_iter": 5000, "precondition": True},
    "vacuum": "umps",
    "correlator": {"source": "umps", "r_max": 30},
    "mass": {"rel_tol": 1e-2, "min_window": 3, "adaptive": False, "cut_tail": True, "tail_tol": 1e-2},
    "reference": {"m_c_sq": 0.0},
    "sweep": {},
    "seed": 0,
    "threads": 1,
    "out": "results",
    "emit_plot_data": True,
}


class ConfigError(ValidationError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_env_value(text):
    try:
        return json.loads(text)
    except ValueError:
        return text


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    out = {}
    for key, raw in environ.items():
        if not key.startswith("KINKFIELD_") or key == "KINKFIELD_NUMBA":
            continue
        name = key[len("KINKFIELD_"):].lower()
        value = _parse_env_value(raw)
        if "__" in name:
            section, sub = name.split("__", 1)
            out.setdefault(section, {})[sub] = value
        else:
            out[name] = value
    return out


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", "config") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}", "config") from exc


def resolve(raw, overrides=None, environ=None):
    """Defaults < config file < environment < explicit overrides, then validated."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", "config")
    cfg = _merge(DEFAULTS, raw)
    cfg = _merge(cfg, env_overrides(environ))
    cfg = _merge(cfg, {k: v for k, v in (overrides or {}).items() if v is not None})
    check(cfg)
    return cfg


def _need(section, key, cfg):
    if key not in cfg.get(section, {}):
        raise ConfigError(f"missing {section}.{key}", f"{section}.{key}")


def check(cfg):
    job = cfg.get("job")
    if job not in JOBS:
        raise ConfigError(f"job must be one of {JOBS} (got {job!r})", "job")
    model = cfg.get("model")
    if not isinstance(model, dict):
        raise ConfigError("model section must be an object", "model")
    for key in ("mu0_sq", "lambda0", "L", "d"):
        if key not in model and not (job == "sweep" and key in cfg.get("sweep", {})):
            raise ConfigError(f"missing model.{key}", f"model.{key}")
    if str(model.get("boundary", "PBC")).upper() not in BOUNDARIES:
        raise ConfigError(f"model.boundary must be one of {BOUNDARIES}", "model.boundary")
    for key in ("seed", "threads"):
        if not isinstance(cfg.get(key), int) or cfg[key] < 0:
            raise ConfigError(f"{key} must be a non-negative integer", key)
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1", "threads")
    solver = cfg["solver"]
    if solver.get("method") not in ("dmrg", "umps"):
        raise ConfigError("solver.method must be 'dmrg' or 'umps'", "solver.method")
    if not isinstance(solver.get("chi"), int) or solver["chi"] < 1:
        raise ConfigError("solver.chi must be a positive integer", "solver.chi")
    if solver.get("local_solver") not in ("dense", "iterative"):
        raise ConfigError("solver.local_solver must be 'dense' or 'iterative'", "solver.local_solver")
    if solver.get("init") not in ("random", "kink"):
        raise ConfigError("solver.init must be 'random' or 'kink'", "solver.init")
    if cfg.get("vacuum") not in ("umps", "pbc"):
        raise ConfigError("vacuum must be 'umps' or 'pbc'", "vacuum")
    if cfg["correlator"].get("source") not in ("umps", "mps"):
        raise ConfigError("correlator.source must be 'umps' or 'mps'", "correlator.source")
    r_max = cfg["correlator"].get("r_max")
    if not isinstance(r_max, int) or r_max < 2:
        raise ConfigError("correlator.r_max must be an integer >= 2", "correlator.r_max")
    if job == "sweep":
        sweep = cfg.get("sweep") or {}
        sub = sweep.get("job", "mass")
        if sub not in JOBS or sub in ("sweep",):
            raise ConfigError(f"sweep.job must be one of {JOBS[:-2] + ('oracle',)}", "sweep.job")
        axes = [a for a in SWEEP_AXES if a in sweep]
        if not axes:
            raise ConfigError(f"sweep needs at least one axis among {SWEEP_AXES}", "sweep")
        for a in axes:
            if not isinstance(sweep[a], list) or len(sweep[a]) == 0:
                raise ConfigError(f"sweep axis {a} must be a nonempty list", f"sweep.{a}")
    for spec in expand_points(cfg):
        try:
            validate(spec, warn=False)
        except ValidationError as exc:
            raise ConfigError(str(exc), "model") from exc


def expand_points(cfg):
    """ModelSpec for every point of the run, in config order (chi kept separately)."""
    return [p[0] for p in points(cfg)]


def points(cfg):
    """(ModelSpec, chi) pairs. Sweep axes vary with the last listed fastest."""
    model = dict(cfg["model"])
    chi = cfg["solver"]["chi"]
    if cfg["job"] != "sweep":
        return [(_spec(model), chi)]
    sweep = cfg["sweep"]
    combos = [{}]
    for axis in SWEEP_AXES:
        if axis in sweep:
            combos = [dict(c, **{axis: v}) for c in combos for v in sweep[axis]]
    out = []
    for c in combos:
        m = dict(model)
        m.update({k: v for k, v in c.items() if k != "chi"})
        out.append((_spec(m), int(c.get("chi", chi))))
    return out


def _spec(model):
    try:
        return ModelSpec(float(model["mu0_sq"]), float(model["lambda0"]), int(model["L"]), int(model["d"]),
                         str(model.get("boundary", "PBC")).upper())
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed model section: {exc}", "model") from exc


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def content_hash(cfg):
    """Git-style blob hash of the canonical config text."""
    data = canonical_json(cfg).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
