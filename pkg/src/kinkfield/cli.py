"""Command-line driver.

``kinkfield <job> --config run.json [--out DIR] [--seed N] [--threads N]``
runs one of ground, kink, correlator, mass, sweep, oracle; ``kinkfield run
run.json`` takes the job from the config. Exit status is 0 on success, 2
for an invalid configuration and 3 for a numerical failure; errors are
also written to stderr as one JSON object.
"""
import argparse
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy

from . import __version__, config, figures, jobs
from ._accel import HAVE_NUMBA, USE_NUMBA
from .errors import KinkfieldError, ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _versions():
    out = {"kinkfield": __version__, "python": platform.python_version(), "numpy": np.__version__,
           "scipy": scipy.__version__}
    if HAVE_NUMBA:
        import numba
        out["numba"] = numba.__version__
    out["kernels"] = "numba" if USE_NUMBA else "numpy"
    return out


def _echo(cfg):
    """Config as recorded: everything that can change the numbers."""
    return {k: v for k, v in cfg.items() if k not in ("out", "threads")}


def _error(message, **extra):
    sys.stderr.write(json.dumps(dict(error=message, **extra), sort_keys=True) + "\n")


def _work(args):
    job, pid, spec, chi, cfg, seed = args
    t0 = time.perf_counter()
    try:
        res = jobs.run_point(job, pid, spec, chi, cfg, seed)
    except (KinkfieldError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        return pid, None, exc, time.perf_counter() - t0
    return pid, res, None, time.perf_counter() - t0


def _results(tasks, threads):
    """Yield outcomes in task order, whatever order workers finish in."""
    if threads <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield _work(t)
        return
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_work, t) for t in tasks]
        try:
            for f in futures:
                yield f.result()
        finally:
            for f in futures:
                f.cancel()


def execute(cfg, stdout=None):
    """Run a resolved config; returns the exit status."""
    stdout = stdout or sys.stdout
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    job = cfg["job"]
    sub = cfg["sweep"].get("job", "mass") if job == "sweep" else job
    pts = config.points(cfg)
    tasks = [(sub, f"p{i:03d}", spec, chi, cfg, cfg["seed"]) for i, (spec, chi) in enumerate(pts)]
    echo = _echo(cfg)
    meta = {"config": echo, "hash": config.content_hash(echo), "versions": _versions(),
            "points": [t[1] for t in tasks], "status": "ok"}
    timing = {}
    records, profiles = [], {}
    status = EXIT_OK
    with open(os.path.join(out, "results.csv"), "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(jobs.COLUMNS) + "\n")
        for pid, res, exc, seconds in _results(tasks, cfg["threads"]):
            timing[pid] = round(seconds, 3)
            if exc is not None:
                status = EXIT_CONFIG if isinstance(exc, ValidationError) else EXIT_NUMERIC
                meta["status"] = "failed"
                meta["failed_point"] = pid
                _error(str(exc), point=pid, kind=type(exc).__name__)
                break
            for rec in [res.record] + res.extra_rows:
                fh.write(",".join(figures.fmt(rec[c]) for c in jobs.COLUMNS) + "\n")
                records.append(rec)
            fh.flush()
            if res.g2 is not None:
                figures.write_csv(os.path.join(out, f"G2_{pid}.csv"), jobs.G2_COLUMNS, res.g2.tolist())
            if res.profile is not None:
                profiles[pid] = res.profile
    if cfg["emit_plot_data"] and records and job != "oracle" and sub != "oracle":
        missing = figures.figure_data(records, profiles, out, cfg["mass"].get("ratio_ansatz", "bessel_sq"))
        if missing:
            meta["figure_inputs_missing"] = missing
    with open(os.path.join(out, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "timing.json"), "w", encoding="utf-8") as fh:
        json.dump(timing, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if sub == "oracle" and records:
        diffs = [r["abs_diff"] for r in records if r["abs_diff"] is not None]
        for r in records:
            stdout.write(f"{r['point']:>10}  dmrg {r['energy']:.12f}  dense {r['dense_energy']:.12f}  "
                         f"|diff| {r['abs_diff']:.3e}\n")
        stdout.write(f"max |diff| = {max(diffs):.3e}\n")
    stdout.write(f"{len(records)} record(s) written to {out}\n")
    return status


def build_parser():
    parser = argparse.ArgumentParser(prog="kinkfield", description="Tensor-network lattice phi^4 runs")
    subs = parser.add_subparsers(dest="command", required=True)

    def common(p, positional=False):
        if positional:
            p.add_argument("config", help="JSON run configuration")
        else:
            p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--threads", type=int, help="worker processes for sweeps")

    for job in config.JOBS:
        common(subs.add_parser(job, help=f"run a {job} job"))
    common(subs.add_parser("run", help="run the job named in the config"), positional=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"out": args.out, "seed": args.seed, "threads": args.threads}
    if args.command != "run":
        overrides["job"] = args.command
    try:
        cfg = config.resolve(config.load(args.config), overrides)
    except config.ConfigError as exc:
        _error(str(exc), field=exc.field)
        return EXIT_CONFIG
    except ValidationError as exc:
        _error(str(exc))
        return EXIT_CONFIG
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
