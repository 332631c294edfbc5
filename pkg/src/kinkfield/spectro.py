"""Masses from equal-time correlators, and analytic reference formulas.

A connected correlator ``G2(r)`` is turned into a local mass ``m(r)`` by
matching the ratio ``G2(r+1) / G2(r)`` to an ansatz:

* ``bessel``: ``G2 ~ K0(m r)``
* ``bessel_sq``: ``G2 ~ K0(m r)^2``
* ``exponential``: ``G2 ~ exp(-m r)``, giving ``m_D(r) = -log(G2(r+1)/G2(r))``

The amplitude cancels in the ratio. A plateau in ``m(r)`` is then located
and averaged.

For ``bessel_sq`` the fitted ``m`` is the mass of each constituent of a
non-interacting pair, so the scalar mass it implies is the pair threshold
``SCALAR_FACTOR["bessel_sq"] * m = 2 m``; see :func:`scalar_mass`.
"""
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.optimize

from . import _kernels
from .errors import DomainError, ExtractionError, FitError, PlateauNotFoundError

ANSATZE = ("bessel", "bessel_sq", "exponential")
SCALAR_FACTOR = {"bessel": 1.0, "bessel_sq": 2.0, "exponential": 1.0}
M_LO, M_HI = 1e-6, 20.0
NOISE_FLOOR = 1e-12


# --------------------------------------------------------------------------
# Bessel functions
# --------------------------------------------------------------------------

def _positive(z):
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError("Bessel K is defined here for z > 0 only")
    return z


def bessel_k0(z):
    """Modified Bessel function of the second kind K0, elementwise."""
    z = _positive(z)
    out = _kernels.k_scaled(0, z) * np.exp(-z)
    return float(out) if out.ndim == 0 else out


def bessel_k1(z):
    z = _positive(z)
    out = _kernels.k_scaled(1, z) * np.exp(-z)
    return float(out) if out.ndim == 0 else out


def log_bessel_k0(z):
    """log K0(z); finite where K0 itself would underflow."""
    z = _positive(z)
    out = np.log(_kernels.k_scaled(0, z)) - z
    return float(out) if out.ndim == 0 else out


def bessel_i0(z):
    out = _kernels.i_series(0, np.asarray(z, dtype=float))
    return float(out) if out.ndim == 0 else out


def bessel_i1(z):
    out = _kernels.i_series(1, np.asarray(z, dtype=float))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# profiles and plateaus
# --------------------------------------------------------------------------

def scalar_mass(m, ansatz):
    """Scalar mass implied by the ansatz parameter ``m`` (pair threshold for ``bessel_sq``)."""
    return SCALAR_FACTOR[ansatz] * m


def synthesize(ansatz, m, r):
    """Model correlator for ``ansatz`` with mass ``m`` at separations ``r``."""
    r = np.asarray(r, dtype=float)
    if ansatz == "bessel":
        return np.exp(log_bessel_k0(m * r))
    if ansatz == "bessel_sq":
        return np.exp(2.0 * log_bessel_k0(m * r))
    if ansatz == "exponential":
        return np.exp(-m * r)
    raise ValueError(f"unknown ansatz {ansatz!r}; expected one of {ANSATZE}")


def usable_length(g2, floor=NOISE_FLOOR):
    """Number of leading entries before the first non-positive or noise-floor value."""
    g2 = np.asarray(g2, dtype=float)
    if len(g2) == 0 or not g2[0] > 0:
        return 0
    bad = ~(g2 > floor * g2[0])
    return int(np.argmax(bad)) if bad.any() else len(g2)


def mass_profile(g2, ansatz="bessel", r0=1, floor=NOISE_FLOOR):
    """Local masses ``m(r)`` for r = r0 .. r0 + len(g2) - 2.

    Entry ``i`` solves the ratio ``g2[i+1] / g2[i]``. Ratios at or above one,
    entries beyond the noise floor, and roots outside [1e-6, 20] give NaN.
    Raises :class:`ExtractionError` when no entry is usable.
    """
    if ansatz not in ANSATZE:
        raise ValueError(f"unknown ansatz {ansatz!r}; expected one of {ANSATZE}")
    g2 = np.asarray(g2, dtype=float)
    n = len(g2) - 1
    if n < 1:
        raise ExtractionError("need at least two correlator values")
    out = np.full(n, np.nan)
    keep = usable_length(g2, floor)
    if keep >= 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.log(g2[1:keep]) - np.log(g2[:keep - 1])
        r = r0 + np.arange(keep - 1, dtype=float)
        if ansatz == "exponential":
            vals = np.where(log_ratio < 0, -log_ratio, np.nan)
        else:
            power = 1.0 if ansatz == "bessel" else 2.0
            vals = _kernels.invert_ratio(log_ratio, r, power, M_LO, M_HI)
        out[:keep - 1] = vals
    if not np.any(np.isfinite(out)):
        raise ExtractionError(f"no usable ratio in the correlator for the {ansatz} ansatz")
    return out


@dataclass(frozen=True)
class MassEstimate:
    value: float
    spread: float
    window: tuple
    ansatz: str
    tolerance_used: float
    per_r: np.ndarray


def plateau_estimate(per_r, rel_tol=1e-2, min_window=3, adaptive=False, ansatz="bessel", r0=1,
                     tol_start=1e-3, tol_cap=1e-1):
    """Average of the longest flat stretch of a mass profile.

    A stretch is a maximal run of consecutive steps with
    ``|m(r+1) - m(r)| <= tol * m(r)``; it must contain at least
    ``min_window`` steps (so ``min_window + 1`` points). The earliest of
    equally long runs wins. With ``adaptive`` the tolerance starts at
    ``tol_start`` and doubles up to ``tol_cap`` until a stretch exists.
    ``window`` is reported in separations r, with ``per_r[0]`` at ``r0``.
    """
    per_r = np.asarray(per_r, dtype=float)
    if min_window < 1:
        raise ValueError("min_window must be >= 1")
    if np.count_nonzero(np.isfinite(per_r)) < min_window + 1:
        raise PlateauNotFoundError(f"need at least {min_window + 1} finite masses", per_r)
    tols = [rel_tol]
    if adaptive:
        tols = []
        t = tol_start
        while t < tol_cap:
            tols.append(t)
            t *= 2.0
        tols.append(tol_cap)
    for tol in tols:
        start, stop = _kernels.longest_run(per_r, tol)
        if stop - start >= min_window:
            seg = per_r[start:stop + 1]
            return MassEstimate(float(np.mean(seg)), float(np.std(seg)), (r0 + start, r0 + stop),
                                ansatz, float(tol), per_r)
    raise PlateauNotFoundError(f"no plateau of {min_window} steps at tolerance {tols[-1]:g}", per_r)


def tail_onset(g2, xi_chi, rel_tol=1e-2, r0=1):
    """First separation from which G2 decays at the finite-entanglement rate.

    Returns the smallest r with ``|m_D(s) xi_chi - 1| <= rel_tol`` for every
    s >= r, or None when the correlator never settles onto ``1 / xi_chi``.
    Beyond this point the decay is fixed by the bond dimension, not by the
    particle content, so Bessel ratios there are not mass estimates.
    """
    if not (xi_chi and math.isfinite(xi_chi) and xi_chi > 0):
        return None
    m_d = mass_profile(g2, "exponential", r0=r0)
    close = np.isfinite(m_d) & (np.abs(m_d * xi_chi - 1.0) <= rel_tol)
    if not close[-1]:
        return None
    k = len(close) - 1
    while k > 0 and close[k - 1]:
        k -= 1
    return r0 + k


def estimate_mass(g2, ansatz="bessel", r0=1, xi_chi=None, tail_tol=1e-2, **plateau_options):
    """``mass_profile`` followed by ``plateau_estimate``.

    With ``xi_chi`` the plateau search stops where the finite-entanglement
    tail begins (see :func:`tail_onset`).
    """
    per_r = mass_profile(g2, ansatz, r0=r0)
    onset = tail_onset(g2, xi_chi, tail_tol, r0=r0) if ansatz != "exponential" else None
    if onset is not None:
        per_r = per_r[:max(onset - r0, 0)]
    return plateau_estimate(per_r, ansatz=ansatz, r0=r0, **plateau_options)


# --------------------------------------------------------------------------
# free lattice field
# --------------------------------------------------------------------------

def free_dispersion(mu_sq, p):
    return np.sqrt(mu_sq + 4.0 * np.sin(0.5 * np.asarray(p, dtype=float)) ** 2)


def free_lattice_mass(mu_sq):
    """Pole of the lattice propagator, 2 asinh(mu / 2)."""
    if mu_sq <= 0:
        raise DomainError("free lattice mass needs mu^2 > 0")
    return 2.0 * math.asinh(0.5 * math.sqrt(mu_sq))


def free_energy_density(mu_sq, L=None):
    """Ground energy per site of the free lattice field.

    Infinite chain: (1/4 pi) int omega_p dp. With ``L`` given: the periodic
    chain's momentum sum (1/L) sum_p omega_p / 2.
    """
    if L is None:
        val, _ = scipy.integrate.quad(lambda p: free_dispersion(mu_sq, p), -math.pi, math.pi,
                                      epsabs=1e-13, epsrel=1e-13, limit=200)
        return val / (4.0 * math.pi)
    p = 2.0 * math.pi * np.arange(L) / L
    return float(np.sum(free_dispersion(mu_sq, p)) / (2.0 * L))


def free_two_point(mu_sq, r, L=None):
    """<phi_0 phi_r> of the free lattice field, infinite chain or periodic ``L``."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if L is None:
        out = []
        for x in r:
            val, _ = scipy.integrate.quad(lambda p: 1.0 / (2.0 * free_dispersion(mu_sq, p)), 0.0, math.pi,
                                          weight="cos", wvar=x, epsabs=1e-15, limit=400)
            out.append(val / math.pi)
        return np.array(out)
    p = 2.0 * math.pi * np.arange(L) / L
    w = 1.0 / (2.0 * free_dispersion(mu_sq, p))
    return np.array([np.sum(np.cos(p * x) * w) / L for x in r])


# --------------------------------------------------------------------------
# semiclassical references
# --------------------------------------------------------------------------

DHN_CONSTANT = 0.5 * (math.sqrt(1.5) / 6.0 - 3.0 / (math.pi * math.sqrt(2.0)))


@dataclass(frozen=True)
class ReferenceMasses:
    mu: float
    classical_mk: float
    dhn_mk: float
    tree_ms: float
    classical_vev: float


def _renormalised_mu(mu0_sq, lambda0, m_c_sq):
    if lambda0 <= 0:
        raise DomainError("kink formulas need lambda0 > 0")
    mu_sq = mu0_sq - m_c_sq
    if mu_sq >= 0:
        raise DomainError(f"broken-phase formulas need mu0^2 - m_C^2 < 0 (got {mu_sq:g})")
    return math.sqrt(-mu_sq)


def reference_masses(mu0_sq, lambda0, m_c_sq=0.0):
    """Classical and one-loop kink masses, tree-level scalar mass and classical vev.

    The bare mass is shifted as ``mu^2 = mu0^2 - m_C^2`` and the formulas
    use the magnitude ``mu = sqrt(-mu^2)``.
    """
    mu = _renormalised_mu(mu0_sq, lambda0, m_c_sq)
    m_s = math.sqrt(2.0) * mu
    return ReferenceMasses(
        mu=mu,
        classical_mk=4.0 * math.sqrt(2.0) * mu ** 3 / lambda0,
        dhn_mk=2.0 * m_s ** 3 / lambda0 + m_s * DHN_CONSTANT,
        tree_ms=m_s,
        classical_vev=math.sqrt(6.0 * mu * mu / lambda0),
    )


FIT_MODELS = {
    "classical_v": lambda r: r.classical_vev,
    "classical_MK": lambda r: r.classical_mk,
    "tree_mS": lambda r: r.tree_ms,
}


@dataclass(frozen=True)
class MassShiftFit:
    m_c_sq: float
    residual_norm: float
    residuals: np.ndarray
    model: str


def fit_mass_shift(points, model, lambda0, span=10.0):
    """Least-squares fit of the additive shift m_C^2 in mu^2 = mu0^2 - m_C^2.

    ``points`` is a sequence of ``(mu0_sq, observed)`` pairs and ``model``
    one of ``classical_v``, ``classical_MK`` or ``tree_mS``. The shift is
    searched in (max(mu0^2), max(mu0^2) + span) so that every point stays
    in the broken phase.
    """
    if model not in FIT_MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {sorted(FIT_MODELS)}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise FitError("need at least 3 points to fit the mass shift")
    mu0, obs = pts[:, 0], pts[:, 1]
    f = FIT_MODELS[model]
    edge = float(np.max(mu0))
    lo, hi = edge + 1e-9 * max(1.0, abs(edge)), edge + span

    def residuals(x):
        c = max(x[0], lo)
        return np.array([f(reference_masses(m, lambda0, c)) for m in mu0]) - obs

    x0 = 0.0 if lo < 0.0 < hi else 0.5 * (lo + hi)
    try:
        sol = scipy.optimize.least_squares(residuals, [x0], bounds=([lo], [hi]),
                                           xtol=1e-15, ftol=1e-15, gtol=1e-15)
    except (ValueError, DomainError) as exc:
        raise FitError(f"mass-shift fit failed: {exc}") from exc
    res = residuals(sol.x)
    if not sol.success or not np.all(np.isfinite(res)):
        raise FitError(f"mass-shift fit did not converge: {sol.message}", res)
    if sol.active_mask[0] != 0:
        raise FitError("mass-shift fit ran into the edge of its search interval", res)
    return MassShiftFit(float(sol.x[0]), float(np.linalg.norm(res)), res, model)
