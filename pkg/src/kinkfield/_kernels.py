"""Loop-bound numeric kernels with numba and vectorised numpy implementations.

Every kernel exists twice: a scalar-loop version compiled with numba
(``*_nb``) and a vectorised numpy version (``*_np``). The dispatchers at
the bottom pick one according to ``_accel.USE_NUMBA``. Both are kept
importable so tests and the benchmark can compare them directly.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

EULER_GAMMA = 0.57721566490153286061
SERIES_MAX = 2.0
ASYMP_MIN = 50.0
_TAIL = 45.0


# --------------------------------------------------------------------------
# modified Bessel functions, scalar numba kernels
# --------------------------------------------------------------------------

@njit
def _k_series_nb(nu, z):
    q = 0.25 * z * z
    log_half = math.log(0.5 * z)
    if nu == 0:
        term = 1.0
        s_i = 1.0
        s_k = 0.0
        harm = 0.0
        for k in range(1, 80):
            term *= q / (k * k)
            harm += 1.0 / k
            s_i += term
            s_k += term * harm
            if term < 1e-18 * s_i:
                break
        return -(log_half + EULER_GAMMA) * s_i + s_k
    # nu == 1
    term = 1.0
    harm_k = 0.0
    harm_k1 = 1.0
    s_i = 1.0
    s_psi = 2.0 * -EULER_GAMMA + harm_k + harm_k1
    for k in range(1, 80):
        term *= q / (k * (k + 1))
        harm_k += 1.0 / k
        harm_k1 += 1.0 / (k + 1)
        s_i += term
        s_psi += term * (-2.0 * EULER_GAMMA + harm_k + harm_k1)
        if term < 1e-18 * s_i:
            break
    i1 = 0.5 * z * s_i
    return 1.0 / z + log_half * i1 - 0.25 * z * s_psi


@njit
def _k_quad_scaled_nb(nu, z):
    # exp(z) K_nu(z) = int_0^inf exp(-z (cosh t - 1)) cosh(nu t) dt, trapezoid rule
    h = min(0.1, 0.5 / math.sqrt(z))
    t_max = math.acosh(1.0 + _TAIL / z)
    n = int(t_max / h) + 2
    total = 0.5
    for j in range(1, n + 1):
        t = j * h
        total += math.exp(-z * (math.cosh(t) - 1.0)) * math.cosh(nu * t)
    return h * total


@njit
def _k_asymp_scaled_nb(nu, z):
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    prev = 1.0
    for k in range(1, 60):
        term *= (mu - (2 * k - 1) ** 2) / (8.0 * k * z)
        if abs(term) > prev:
            break
        total += term
        prev = abs(term)
        if prev < 1e-18:
            break
    return math.sqrt(math.pi / (2.0 * z)) * total


@njit
def k_scaled_nb(nu, z):
    """exp(z) * K_nu(z) for nu in {0, 1} and z > 0."""
    if z <= SERIES_MAX:
        return math.exp(z) * _k_series_nb(nu, z)
    if z >= ASYMP_MIN:
        return _k_asymp_scaled_nb(nu, z)
    return _k_quad_scaled_nb(nu, z)


@njit
def i_series_nb(nu, z):
    """I_nu(z) for nu in {0, 1} by its power series."""
    q = 0.25 * z * z
    term = 1.0
    total = 1.0
    for k in range(1, 400):
        term *= q / (k * (k + nu))
        total += term
        if term < 1e-18 * total:
            break
    if nu == 1:
        return 0.5 * z * total
    return total


@njit
def log_k0_nb(z):
    return math.log(k_scaled_nb(0, z)) - z


@njit
def k0_array_nb(z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = math.exp(-z[i]) * k_scaled_nb(0, z[i])
    return out


@njit
def invert_ratio_nb(log_ratio, r, power, lo, hi):
    """Solve power*(log K0(m(r+1)) - log K0(m r)) = log_ratio for m, per entry.

    Entries without a root inside [lo, hi] come back as NaN.
    """
    out = np.full(log_ratio.shape[0], np.nan)
    for i in range(log_ratio.shape[0]):
        target = log_ratio[i]
        if not math.isfinite(target) or target >= 0.0:
            continue
        ri = r[i]
        g_lo = power * (log_k0_nb(lo * (ri + 1.0)) - log_k0_nb(lo * ri)) - target
        g_hi = power * (log_k0_nb(hi * (ri + 1.0)) - log_k0_nb(hi * ri)) - target
        if g_lo < 0.0 or g_hi > 0.0:
            continue
        a = lo
        b = hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            g = power * (log_k0_nb(mid * (ri + 1.0)) - log_k0_nb(mid * ri)) - target
            if g > 0.0:
                a = mid
            else:
                b = mid
            if b - a <= 1e-15 * b:
                break
        out[i] = 0.5 * (a + b)
    return out


@njit
def longest_run_nb(m, rel_tol):
    """Longest run of consecutive finite entries with small relative steps.

    Returns (start, stop) point indices, stop inclusive, earliest on ties.
    A run of k accepted steps spans k + 1 points.
    """
    best_start = 0
    best_len = 0
    cur_start = 0
    cur_len = 0
    n = m.shape[0]
    for i in range(n - 1):
        a = m[i]
        b = m[i + 1]
        ok = math.isfinite(a) and math.isfinite(b) and abs(b - a) <= rel_tol * abs(a)
        if ok:
            if cur_len == 0:
                cur_start = i
            cur_len += 1
            if cur_len > best_len:
                best_len = cur_len
                best_start = cur_start
        else:
            cur_len = 0
    if best_len == 0:
        return 0, -1
    return best_start, best_start + best_len


# --------------------------------------------------------------------------
# vectorised numpy versions
# --------------------------------------------------------------------------

def _k_series_np(nu, z):
    q = 0.25 * z * z
    log_half = np.log(0.5 * z)
    term = np.ones_like(z)
    s_i = np.ones_like(z)
    if nu == 0:
        s_k = np.zeros_like(z)
        harm = 0.0
        for k in range(1, 40):
            term = term * q / (k * k)
            harm += 1.0 / k
            s_i += term
            s_k += term * harm
        return -(log_half + EULER_GAMMA) * s_i + s_k
    harm_k, harm_k1 = 0.0, 1.0
    s_psi = np.full_like(z, -2.0 * EULER_GAMMA + harm_k + harm_k1)
    for k in range(1, 40):
        term = term * q / (k * (k + 1))
        harm_k += 1.0 / k
        harm_k1 += 1.0 / (k + 1)
        s_i += term
        s_psi += term * (-2.0 * EULER_GAMMA + harm_k + harm_k1)
    return 1.0 / z + log_half * (0.5 * z * s_i) - 0.25 * z * s_psi


def _k_quad_scaled_np(nu, z):
    out = np.empty_like(z)
    for i, zi in enumerate(z):
        h = min(0.1, 0.5 / np.sqrt(zi))
        t = h * np.arange(int(np.arccosh(1.0 + _TAIL / zi) / h) + 3)
        f = np.exp(-zi * (np.cosh(t) - 1.0)) * np.cosh(nu * t)
        out[i] = h * (f.sum() - 0.5 * f[0])
    return out


def _k_asymp_scaled_np(nu, z):
    mu = 4.0 * nu * nu
    term = np.ones_like(z)
    total = np.ones_like(z)
    prev = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, 60):
        term = term * (mu - (2 * k - 1) ** 2) / (8.0 * k * z)
        active &= np.abs(term) <= prev
        total += np.where(active, term, 0.0)
        prev = np.where(active, np.abs(term), prev)
        if not active.any():
            break
    return np.sqrt(np.pi / (2.0 * z)) * total


def k_scaled_np(nu, z):
    z = np.asarray(z, dtype=float)
    flat = np.atleast_1d(z).ravel()
    out = np.empty_like(flat)
    small = flat <= SERIES_MAX
    large = flat >= ASYMP_MIN
    mid = ~(small | large)
    if small.any():
        out[small] = np.exp(flat[small]) * _k_series_np(nu, flat[small])
    if large.any():
        out[large] = _k_asymp_scaled_np(nu, flat[large])
    if mid.any():
        out[mid] = _k_quad_scaled_np(nu, flat[mid])
    return out.reshape(z.shape)


def log_k0_np(z):
    return np.log(k_scaled_np(0, z)) - z


def invert_ratio_np(log_ratio, r, power, lo, hi):
    log_ratio = np.asarray(log_ratio, dtype=float)
    r = np.asarray(r, dtype=float)

    def g(m):
        return power * (log_k0_np(m * (r + 1.0)) - log_k0_np(m * r)) - log_ratio

    a = np.full_like(log_ratio, lo)
    b = np.full_like(log_ratio, hi)
    valid = np.isfinite(log_ratio) & (log_ratio < 0.0)
    with np.errstate(invalid="ignore"):
        valid &= (g(a) >= 0.0) & (g(b) <= 0.0)
    for _ in range(200):
        mid = 0.5 * (a + b)
        above = g(mid) > 0.0
        a = np.where(above, mid, a)
        b = np.where(above, b, mid)
        if np.all((b - a)[valid] <= 1e-15 * b[valid]):
            break
    return np.where(valid, 0.5 * (a + b), np.nan)


def longest_run_np(m, rel_tol):
    m = np.asarray(m, dtype=float)
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(m[:-1]) & np.isfinite(m[1:]) & (np.abs(np.diff(m)) <= rel_tol * np.abs(m[:-1]))
    if not ok.any():
        return 0, -1
    edges = np.diff(np.concatenate(([0], ok.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    lengths = stops - starts
    best = int(np.argmax(lengths))
    return int(starts[best]), int(starts[best] + lengths[best])


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def k_scaled(nu, z):
    """exp(z) K_nu(z), elementwise."""
    if USE_NUMBA:
        z = np.asarray(z, dtype=float)
        flat = np.atleast_1d(z).ravel()
        out = np.array([k_scaled_nb(nu, float(v)) for v in flat])
        return out.reshape(z.shape)
    return k_scaled_np(nu, z)


def invert_ratio(log_ratio, r, power, lo, hi):
    if USE_NUMBA:
        return invert_ratio_nb(np.ascontiguousarray(log_ratio, dtype=float),
                               np.ascontiguousarray(r, dtype=float), float(power), lo, hi)
    return invert_ratio_np(log_ratio, r, power, lo, hi)


def longest_run(m, rel_tol):
    if USE_NUMBA:
        return longest_run_nb(np.ascontiguousarray(m, dtype=float), float(rel_tol))
    return longest_run_np(m, rel_tol)


def i_series(nu, z):
    z = np.asarray(z, dtype=float)
    flat = np.atleast_1d(z).ravel()
    if USE_NUMBA:
        out = np.array([i_series_nb(nu, float(v)) for v in flat])
    else:
        q = 0.25 * flat * flat
        term = np.ones_like(flat)
        total = np.ones_like(flat)
        for k in range(1, 400):
            term = term * q / (k * (k + nu))
            total += term
            if np.all(term < 1e-18 * total):
                break
        out = 0.5 * flat * total if nu == 1 else total
    return out.reshape(z.shape)
