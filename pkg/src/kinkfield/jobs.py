"""Single-point computations behind the command-line jobs.

Each job maps ``(ModelSpec, chi, config)`` to a :class:`PointResult`: one
flat record for ``results.csv``, an optional correlator table and an
optional field profile.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import dmrg, mps, oracle, spectro, umps
from .errors import DomainError, ExtractionError, PlateauNotFoundError
from .model import local_operator

COLUMNS = (
    "point", "job", "boundary", "mu0_sq", "lambda0", "g0", "L", "d", "chi", "seed",
    "energy", "energy_per_site", "e_vac", "M_K", "two_M_K",
    "m_S_bessel", "m_S_bessel_window", "m_S_bessel_sq", "m_S_bessel_sq_window",
    "m_D", "m_D_window", "ratio_mS_2MK",
    "phi_mean", "phi_abs_mean", "phi_sq_mean", "phi_std", "phi_sq_std",
    "entropy_mid", "xi_chi", "dense_energy", "abs_diff", "converged",
    "classical_v", "classical_MK", "dhn_MK", "tree_mS",
)

G2_COLUMNS = ("r", "G2", "m_bessel", "m_bessel_sq", "m_D")


@dataclass
class PointResult:
    record: dict
    g2: np.ndarray = None
    profile: dict = None
    extra_rows: list = field(default_factory=list)


def _base(point_id, job, spec, chi, seed):
    rec = {c: None for c in COLUMNS}
    rec.update(point=point_id, job=job, boundary=spec.boundary, mu0_sq=spec.mu0_sq, lambda0=spec.lambda0,
               g0=spec.g0 if math.isfinite(spec.g0) else None, L=spec.L, d=spec.d, chi=chi, seed=seed)
    return rec


def _sweep_config(cfg, chi, seed):
    s = cfg["solver"]
    return dmrg.SweepConfig(chi=chi, max_sweeps=s["max_sweeps"], min_sweeps=s["min_sweeps"],
                            energy_tol=s["energy_tol"], metric_regularization=s["metric_regularization"],
                            local_solver=s["local_solver"], lanczos_tol=s["lanczos_tol"], init=s["init"],
                            noise=s["noise"], seed=seed)


def _umps_options(cfg, seed):
    u = cfg["umps"]
    return dict(tol=u["tol"], max_iter=u["max_iter"], precondition=u["precondition"], seed=seed)


def _umps_chi(cfg, chi):
    return cfg["umps"].get("chi") or chi


def _references(rec, spec, cfg):
    try:
        ref = spectro.reference_masses(spec.mu0_sq, spec.lambda0, float(cfg["reference"].get("m_c_sq", 0.0)))
    except DomainError:
        return
    rec.update(classical_v=ref.classical_vev, classical_MK=ref.classical_mk, dhn_MK=ref.dhn_mk,
               tree_mS=ref.tree_ms)


def _profile_stats(rec, phi, phi_sq):
    rec.update(phi_mean=float(np.mean(phi)), phi_abs_mean=float(abs(np.mean(phi))),
               phi_sq_mean=float(np.mean(phi_sq)), phi_std=float(np.std(phi)), phi_sq_std=float(np.std(phi_sq)))


def _mass_columns(rec, g2, cfg):
    """Per-r mass table and plateau estimates for all three ansatze."""
    m = cfg["mass"]
    table = {}
    onset = None
    if m["cut_tail"] and rec.get("xi_chi") is not None:
        onset = spectro.tail_onset(g2, rec["xi_chi"], m["tail_tol"])
    for ansatz, col in (("bessel", "m_S_bessel"), ("bessel_sq", "m_S_bessel_sq"), ("exponential", "m_D")):
        try:
            prof = spectro.mass_profile(g2, ansatz)
        except ExtractionError:
            table[ansatz] = np.full(len(g2) - 1, np.nan)
            continue
        table[ansatz] = prof
        search = prof if onset is None or ansatz == "exponential" else prof[:onset - 1]
        try:
            est = spectro.plateau_estimate(search, rel_tol=m["rel_tol"], min_window=m["min_window"],
                                           adaptive=m["adaptive"], ansatz=ansatz)
        except PlateauNotFoundError:
            continue
        rec[col] = spectro.scalar_mass(est.value, ansatz)
        rec[col + "_window"] = f"{est.window[0]}-{est.window[1]}"
    return table


def g2_table(g2, masses):
    """Rows (r, G2, m_bessel, m_bessel_sq, m_D); the last r has no mass.

    Mass columns are scalar masses, so ``m_bessel_sq`` is twice the fitted
    constituent mass.
    """
    n = len(g2)
    out = np.full((n, 5), np.nan)
    out[:, 0] = np.arange(1, n + 1)
    out[:, 1] = g2
    for j, key in enumerate(("bessel", "bessel_sq", "exponential"), start=2):
        out[:n - 1, j] = spectro.scalar_mass(masses[key], key)
    return out


def _vacuum_umps(spec, chi, cfg, seed):
    u = umps.umps_minimize(spec, chi, **_umps_options(cfg, seed))
    return u


def run_ground(point_id, spec, chi, cfg, seed):
    rec = _base(point_id, "ground", spec, chi, seed)
    _references(rec, spec, cfg)
    r_max = cfg["correlator"]["r_max"]
    if cfg["solver"]["method"] == "umps":
        u = _vacuum_umps(spec, _umps_chi(cfg, chi), cfg, seed)
        phi = umps.field_expectation(u.state)
        phi_sq = umps.expectation(u.state, local_operator("phi_sq", spec.d))
        rec.update(energy_per_site=u.energy, e_vac=u.energy, phi_mean=phi, phi_abs_mean=abs(phi),
                   phi_sq_mean=phi_sq, phi_std=0.0, phi_sq_std=0.0, converged=u.converged,
                   xi_chi=umps.correlation_length(u.state), chi=_umps_chi(cfg, chi))
        g2 = umps.umps_connected_two_point(u.state, r_max)
    else:
        res = dmrg.minimize(spec, config=_sweep_config(cfg, chi, seed))
        rec.update(energy=res.energy, energy_per_site=res.energy / spec.L, converged=res.converged)
        _profile_stats(rec, res.phi_profile, res.phi_sq_profile)
        if spec.boundary == "OBC":
            rec["entropy_mid"] = mps.entanglement_entropy(res.state, spec.L // 2)
        limit = spec.L // 2 if spec.periodic else spec.L - 1
        g2 = mps.connected_two_point(res.state, min(r_max, limit))
    masses = _mass_columns(rec, g2, cfg)
    return PointResult(rec, g2_table(g2, masses))


def _kink(spec, chi, cfg, seed, e_vac=None):
    tspec = spec.with_(boundary="TPBC")
    scfg = _sweep_config(cfg, chi, seed)
    if e_vac is None and cfg["vacuum"] == "umps":
        e_vac = _vacuum_umps(spec, _umps_chi(cfg, chi), cfg, seed).energy
    return dmrg.kink_mass(tspec, e_vac, config=scfg, vacuum=cfg["vacuum"], umps_options=_umps_options(cfg, seed))


def _kink_fields(rec, km):
    rec.update(energy=km.kink_energy, energy_per_site=km.kink_energy / km.L, e_vac=km.vacuum_energy_density,
               M_K=km.value, two_M_K=2.0 * km.value, converged=km.kink.converged)
    _profile_stats(rec, km.kink.phi_profile, km.kink.phi_sq_profile)


def run_kink(point_id, spec, chi, cfg, seed):
    rec = _base(point_id, "kink", spec.with_(boundary="TPBC"), chi, seed)
    _references(rec, spec, cfg)
    km = _kink(spec, chi, cfg, seed)
    _kink_fields(rec, km)
    profile = {"phi": km.kink.phi_profile, "phi_sq": km.kink.phi_sq_profile}
    return PointResult(rec, None, profile)


def _vacuum_correlator(spec, chi, cfg, seed, rec):
    r_max = cfg["correlator"]["r_max"]
    if cfg["correlator"]["source"] == "umps":
        u = _vacuum_umps(spec, _umps_chi(cfg, chi), cfg, seed)
        phi = umps.field_expectation(u.state)
        rec.update(e_vac=u.energy, xi_chi=umps.correlation_length(u.state), phi_mean=phi, phi_abs_mean=abs(phi),
                   phi_sq_mean=umps.expectation(u.state, local_operator("phi_sq", spec.d)))
        return umps.umps_connected_two_point(u.state, r_max), u.energy, u.converged
    pspec = spec.with_(boundary="PBC")
    res = dmrg.minimize(pspec, config=_sweep_config(cfg, chi, seed))
    _profile_stats(rec, res.phi_profile, res.phi_sq_profile)
    rec["e_vac"] = res.energy / spec.L
    g2 = mps.connected_two_point(res.state, min(r_max, spec.L // 2))
    return g2, res.energy / spec.L, res.converged


def run_correlator(point_id, spec, chi, cfg, seed):
    rec = _base(point_id, "correlator", spec, chi, seed)
    _references(rec, spec, cfg)
    g2, _, ok = _vacuum_correlator(spec, chi, cfg, seed, rec)
    rec["converged"] = ok
    masses = _mass_columns(rec, g2, cfg)
    return PointResult(rec, g2_table(g2, masses))


def run_mass(point_id, spec, chi, cfg, seed):
    rec = _base(point_id, "mass", spec, chi, seed)
    _references(rec, spec, cfg)
    g2, e_vac, ok = _vacuum_correlator(spec, chi, cfg, seed, rec)
    masses = _mass_columns(rec, g2, cfg)
    vac_fields = {k: rec[k] for k in ("phi_mean", "phi_abs_mean", "phi_sq_mean", "xi_chi")}
    km = _kink(spec, chi, cfg, seed, e_vac=e_vac if cfg["vacuum"] == "umps" else None)
    _kink_fields(rec, km)
    # vacuum observables describe the state the masses come from
    rec.update(vac_fields)
    rec["phi_std"], rec["phi_sq_std"] = float(np.std(km.kink.phi_profile)), float(np.std(km.kink.phi_sq_profile))
    rec["converged"] = bool(ok and km.kink.converged)
    ratio_col = {"bessel": "m_S_bessel", "bessel_sq": "m_S_bessel_sq"}[cfg["mass"].get("ratio_ansatz", "bessel_sq")]
    if rec[ratio_col] is not None and km.value > 0:
        rec["ratio_mS_2MK"] = rec[ratio_col] / (2.0 * km.value)
    profile = {"phi": km.kink.phi_profile, "phi_sq": km.kink.phi_sq_profile}
    return PointResult(rec, g2_table(g2, masses), profile)


def run_oracle(point_id, spec, chi, cfg, seed):
    """DMRG against exact diagonalisation for every boundary condition."""
    rows = []
    for b in ("OBC", "PBC", "TPBC"):
        s = spec.with_(boundary=b)
        rec = _base(f"{point_id}-{b}", "oracle", s, chi, seed)
        e_dense, _ = oracle.dense_ground(s)
        res = dmrg.minimize(s, config=_sweep_config(cfg, chi, seed))
        rec.update(energy=res.energy, energy_per_site=res.energy / s.L, dense_energy=e_dense,
                   abs_diff=abs(res.energy - e_dense), converged=res.converged)
        _profile_stats(rec, res.phi_profile, res.phi_sq_profile)
        rows.append(rec)
    return PointResult(rows[0], None, None, rows[1:])


RUNNERS = {
    "ground": run_ground,
    "kink": run_kink,
    "correlator": run_correlator,
    "mass": run_mass,
    "oracle": run_oracle,
}


def run_point(job, point_id, spec, chi, cfg, seed):
    return RUNNERS[job](point_id, spec, chi, cfg, seed)
