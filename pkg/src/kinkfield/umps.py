"""Uniform (translation-invariant) MPS in the infinite-volume limit.

One tensor ``A`` of shape ``(d, chi, chi)`` repeats on every site. The
transfer matrix acts on right vectors as ``x -> sum_n A^n x A^n.T`` and on
left vectors as ``y -> sum_n A^n.T y A^n``; both are stored as ``chi x chi``
matrices. A state is normalised when the dominant transfer eigenvalue is 1
and its left and right fixed points satisfy ``sum(l * r) = 1``.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ConditioningError, ValidationError
from .model import local_operator, parity, spec_onsite, validate
from .tensor import dominant_eigenpair


@dataclass
class UniformMPS:
    A: np.ndarray
    eta: float = None
    l: np.ndarray = None
    r: np.ndarray = None

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def chi(self):
        return self.A.shape[1]

    def z2_image(self):
        """The state with phi -> -phi applied on every site."""
        signs = np.diag(parity(self.d))
        return normalize(UniformMPS(self.A * signs[:, None, None]))


# --------------------------------------------------------------------------
# transfer matrix
# --------------------------------------------------------------------------

def apply_right(A, x, B=None, op=None):
    """sum_{n,m} op[n, m] A^n x B^m.T (B = A, op = identity by default)."""
    B = A if B is None else B
    if op is not None:
        B = np.tensordot(op, B, axes=([1], [0]))
    t = np.tensordot(A, x, axes=([2], [0]))              # n a d
    return np.tensordot(t, B, axes=([0, 2], [0, 2]))     # a b


def apply_left(A, y, B=None, op=None):
    """sum_{n,m} op[n, m] A^n.T y B^m."""
    B = A if B is None else B
    if op is not None:
        B = np.tensordot(op, B, axes=([1], [0]))
    t = np.tensordot(y, B, axes=([1], [1]))              # a m d
    return np.tensordot(A, t, axes=([0, 1], [1, 0]))     # c d


def transfer_dense(A):
    """chi^2 x chi^2 matrix acting on row-major flattened right vectors."""
    chi = A.shape[1]
    return np.einsum("nac,nbd->abcd", A, A).reshape(chi * chi, chi * chi)


def _sym_sign(m):
    m = 0.5 * (m + m.T)
    tr = np.trace(m)
    return m if tr >= 0 else -m


def fixed_points(A, tol=1e-13, guess=None):
    """(eta, l, r): dominant transfer eigenvalue and its left/right fixed points.

    The fixed points are symmetrised, made positive in trace and scaled so
    that ``sum(l * r) = 1``.
    """
    chi = A.shape[1]
    dim = chi * chi
    if dim <= 400:
        vals, vr = np.linalg.eig(transfer_dense(A))
        order = np.argsort(-np.abs(vals))
        i = order[0]
        if len(vals) > 1 and abs(abs(vals[order[1]]) - abs(vals[i])) <= 1e-12 * abs(vals[i]):
            raise ConditioningError("dominant transfer eigenvalue is degenerate (state is not injective)")
        eta = float(np.real(vals[i]))
        r = np.real(vr[:, i]).reshape(chi, chi)
        lv, lvec = np.linalg.eig(transfer_dense(A).T)
        j = int(np.argmin(np.abs(lv - vals[i])))
        l = np.real(lvec[:, j]).reshape(chi, chi)
    else:
        # identity start keeps ARPACK deterministic and is close to a fixed point
        v0 = w0 = np.eye(chi).ravel()
        if guess is not None:
            w0, v0 = guess[0].ravel(), guess[1].ravel()
        eta, lf, rf = dominant_eigenpair(
            lambda x: apply_right(A, x.reshape(chi, chi)).ravel(), dim, tol=tol,
            apply_left=lambda y: apply_left(A, y.reshape(chi, chi)).ravel(), v0=v0, w0=w0)
        l, r = lf.reshape(chi, chi), rf.reshape(chi, chi)
    l, r = _sym_sign(l), _sym_sign(r)
    s = float(np.sum(l * r))
    if not s > 0:
        raise ConditioningError("left and right fixed points have non-positive overlap")
    l /= math.sqrt(s)
    r /= math.sqrt(s)
    return eta, l, r


def normalize(u, guess=None):
    """Scale A so that eta = 1 and cache the fixed points."""
    A = np.asarray(u.A, dtype=float)
    eta, l, r = fixed_points(A, guess=guess)
    if not eta > 0:
        raise ConditioningError(f"dominant transfer eigenvalue {eta} is not positive")
    A = A / math.sqrt(eta)
    return UniformMPS(A, 1.0, l, r)


def _ensure(u):
    return u if (u.eta == 1.0 and u.l is not None) else normalize(u)


def fixed_point_residuals(u):
    u = _ensure(u)
    rl = np.linalg.norm(apply_left(u.A, u.l) - u.l)
    rr = np.linalg.norm(apply_right(u.A, u.r) - u.r)
    return float(rl), float(rr)


def expectation(u, op):
    """Single-site <O> in the normalised state."""
    u = _ensure(u)
    return float(np.sum(u.l * apply_right(u.A, u.r, op=op)))


def field_expectation(u):
    return expectation(u, local_operator("phi", u.d))


# --------------------------------------------------------------------------
# energy and gradient
# --------------------------------------------------------------------------

def bond_operator(spec):
    """Two-site term h (x) 1 - phi (x) phi as a (d, d, d, d) tensor [n, m, k, q]."""
    d = spec.d
    h = spec_onsite(spec)
    phi = local_operator("phi", d)
    h2 = np.kron(h, np.eye(d)) - np.kron(phi, phi)
    return h2.reshape(d, d, d, d)


def _pair(A):
    return np.einsum("nab,mbc->nmac", A, A)


def _two_site_right(A, h2, r):
    """E2[h2] r as a chi x chi matrix, plus the intermediate used by the gradient."""
    C = _pair(A)
    t = np.einsum("kqbd,cd->kqbc", C, r)
    u = np.tensordot(h2, t, axes=([2, 3], [0, 1]))       # n m b c
    return np.einsum("nmac,nmbc->ab", C, u), u


def energy_density(u, spec):
    """Energy per site of the infinite chain."""
    u = _ensure(u)
    h2 = bond_operator(validate(spec, warn=False))
    x, _ = _two_site_right(u.A, h2, u.r)
    return float(np.sum(u.l * x))


umps_energy_density = energy_density


def _pseudo_inverse_solve(A, l, r, y, left):
    """Solve (1 - E + |r)(l|) x = y (or its transpose for left vectors)."""
    chi = A.shape[1]
    m = np.eye(chi * chi) - transfer_dense(A) + np.outer(r.ravel(), l.ravel())
    if left:
        m = m.T
    return scipy.linalg.solve(m, y.ravel()).reshape(chi, chi)


def _normalised_gradient(A, spec, h2, guess=None):
    """(e, gradient with respect to the normalised tensor, normalised state, eta)."""
    A = np.asarray(A, dtype=float)
    eta, l, r = fixed_points(A, guess=guess)
    if not eta > 0:
        raise ConditioningError(f"dominant transfer eigenvalue {eta} is not positive")
    An = A / math.sqrt(eta)
    d = An.shape[0]
    x, inner = _two_site_right(An, h2, r)
    e = float(np.sum(l * x))
    ht = h2 - e * np.eye(d * d).reshape(d, d, d, d)
    x, inner = _two_site_right(An, ht, r)
    # bond term acting on the varied tensor
    g = np.einsum("ab,mxc,nmbc->nax", l, An, inner)
    g += np.einsum("ab,nax,nmbc->mxc", l, An, inner)
    # varied tensor to the left of the bond
    rh = _pseudo_inverse_solve(An, l, r, x, left=False)
    g += np.einsum("ab,nbd,cd->nac", l, An, rh)
    # varied tensor to the right of the bond
    C = _pair(An)
    t = np.einsum("ab,nmac->nmbc", l, C)
    t = np.tensordot(ht, t, axes=([0, 1], [0, 1]))       # k q b c
    y = np.einsum("kqbc,kqbd->cd", t, C)
    lh = _pseudo_inverse_solve(An, l, r, y, left=True)
    g += np.einsum("ab,nbd,cd->nac", lh, An, r)
    return e, 2.0 * g, UniformMPS(An, 1.0, l, r), eta


def energy_and_gradient(A, spec, h2=None):
    """(e, de/dA) for an arbitrary, unnormalised tensor.

    ``e`` is invariant under ``A -> c A``, so the gradient is orthogonal
    to ``A`` and scales as ``1/c``.
    """
    h2 = bond_operator(spec) if h2 is None else h2
    e, g, _, eta = _normalised_gradient(A, spec, h2)
    return e, g / math.sqrt(eta)


# --------------------------------------------------------------------------
# minimisation
# --------------------------------------------------------------------------

@dataclass
class UMPSResult:
    state: UniformMPS
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    line_search_failed: bool = False
    history: list = field(default_factory=list)
    phi: float = 0.0

    @property
    def A(self):
        return self.state.A


def random_umps(d, chi, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, chi, chi))
    # bias towards low occupation so the start is not dominated by truncation edge states
    A *= np.exp(-0.5 * np.arange(d))[:, None, None]
    return normalize(UniformMPS(A))


def grow_umps(u, chi, noise=1e-2, seed=0):
    """Embed a state block-diagonally into a larger bond dimension plus damped noise."""
    A = np.asarray(u.A, dtype=float)
    d, c, _ = A.shape
    if chi < c:
        raise ValidationError(f"cannot grow bond dimension {c} down to {chi}")
    rng = np.random.default_rng(seed)
    B = noise * rng.standard_normal((d, chi, chi)) * np.exp(-0.5 * np.arange(d))[:, None, None]
    B[:, :c, :c] += A
    return normalize(UniformMPS(B))


def ramp_schedule(chi):
    """Bond dimensions 1, 2, 4, ... ending at ``chi``."""
    out = [1]
    while out[-1] * 2 < chi:
        out.append(out[-1] * 2)
    if out[-1] != chi:
        out.append(chi)
    return out


def _metric_inverse(m, delta):
    s, v = np.linalg.eigh(0.5 * (m + m.T))
    return (v / (np.maximum(s, 0.0) + delta)) @ v.T


def umps_minimize(spec, chi, tol=1e-8, max_iter=5000, seed=0, init=None, precondition=True,
                  restart=50, armijo=1e-4, callback=None, ramp=True):
    """Minimise the energy density over the uniform tensor by nonlinear CG.

    Polak-Ribiere directions (clipped at zero, restarted every ``restart``
    steps) with a backtracking Armijo line search. With ``precondition``
    the gradient is mapped through the inverse fixed points,
    ``g -> l^-1 g r^-1`` (regularised), which makes the step sizes much
    more uniform across bond directions. The tensor is rescaled to unit
    transfer eigenvalue after every step.

    Without ``init`` and with ``ramp`` the bond dimension is grown as
    1, 2, 4, ..., chi, each stage started from the previous optimum plus
    small noise. Random starts at the full bond dimension often settle on
    a saddle that copies a smaller-chi optimum into several degenerate
    blocks (a non-injective state); the ramp avoids this.

    The loop also stops when the line search fails or when the energy has
    not dropped by more than double-precision resolution for 20 steps.
    ``converged`` is set when the gradient norm is below ``tol``, or when
    the run stopped at that precision floor with a gradient below
    ``1e3 * tol`` (large local dimensions put the floating-point noise of
    the gradient well above 1e-8).
    """
    if init is None and ramp and chi > 1:
        stages = ramp_schedule(chi)
        u = None
        for k, c in enumerate(stages[:-1]):
            start = None if u is None else grow_umps(u, c, seed=seed + k)
            u = umps_minimize(spec, c, tol=max(tol, 1e-6), max_iter=max_iter, seed=seed, init=start,
                              precondition=precondition, restart=restart, armijo=armijo, ramp=False).state
        init = grow_umps(u, chi, seed=seed + len(stages))
    spec = validate(spec, warn=False)
    if chi < 1:
        raise ValidationError("chi must be >= 1")
    h2 = bond_operator(spec)
    u = normalize(init) if init is not None else random_umps(spec.d, chi, seed)
    A = u.A
    e, g, u, _ = _normalised_gradient(A, spec, h2)
    history = [e]
    direction = None
    prev_g = prev_s = None
    step = 1.0
    converged = False
    failed = False
    stalled = 0
    it = 0
    gnorm = float(np.linalg.norm(g))
    for it in range(1, max_iter + 1):
        if gnorm < tol:
            converged = True
            it -= 1
            break
        if precondition:
            delta = max(1e-12, min(1e-3, gnorm))
            li = _metric_inverse(u.l, delta)
            ri = _metric_inverse(u.r, delta)
            s = np.einsum("ab,nbc,cd->nad", li, g, ri)
        else:
            s = g
        if direction is None or prev_g is None or (it - 1) % restart == 0:
            direction = -s
        else:
            beta = max(0.0, float(np.sum(g * (s - prev_s)) / np.sum(prev_g * prev_s)))
            direction = -s + beta * direction
        slope = float(np.sum(g * direction))
        if slope >= 0:
            direction = -s
            slope = float(np.sum(g * direction))
        accepted = False
        alpha = min(step * 2.0, 1e3)
        for _ in range(60):
            trial = A + alpha * direction
            try:
                e_new, g_new, u_new, eta = _normalised_gradient(trial, spec, h2, guess=(u.l, u.r))
            except (ConditioningError, np.linalg.LinAlgError):
                alpha *= 0.5
                continue
            if e_new <= e + armijo * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if np.array_equal(direction, -s):
                failed = True
                break
            direction = None
            continue
        step = alpha
        prev_g, prev_s = g, s
        A, e, g, u = u_new.A, e_new, g_new, u_new
        direction = direction / math.sqrt(eta)
        gnorm = float(np.linalg.norm(g))
        history.append(e)
        resolution = 64 * np.finfo(float).eps * max(1.0, abs(e))
        stalled = stalled + 1 if history[-2] - e <= resolution else 0
        if stalled >= 20:
            break
        if callback is not None:
            callback(it, e, gnorm)
    if gnorm < tol or ((failed or stalled >= 20) and gnorm < 1e3 * tol):
        converged = True
    return UMPSResult(u, e, gnorm, it, converged, failed, history, field_expectation(u))


# --------------------------------------------------------------------------
# correlators
# --------------------------------------------------------------------------

def umps_connected_two_point(u, r_max, op=None):
    """G2(r) = <O_0 O_r> - <O>^2 for r = 1..r_max (O = phi by default).

    The disconnected part is removed by projecting out the fixed point
    before propagating, so exponentially small values stay accurate.
    """
    u = _ensure(u)
    op = local_operator("phi", u.d) if op is None else op
    A, l, r = u.A, u.l, u.r
    mean = float(np.sum(l * apply_right(A, r, op=op)))
    left = apply_left(A, l, op=op)
    x = apply_right(A, r, op=op) - mean * r
    out = np.empty(r_max)
    for k in range(r_max):
        out[k] = float(np.sum(left * x))
        x = apply_right(A, x)
        x -= np.sum(l * x) * r
    return out


def transfer_spectrum(u, k=4):
    """Largest ``k`` transfer eigenvalues by magnitude (normalised state: first is 1)."""
    u = _ensure(u)
    dim = u.chi ** 2
    if dim <= 400 or k >= dim - 1:
        vals = np.linalg.eigvals(transfer_dense(u.A))
    else:
        chi = u.chi
        op = scipy.sparse.linalg.LinearOperator(
            (dim, dim), matvec=lambda x: apply_right(u.A, x.reshape(chi, chi)).ravel(), dtype=float)
        vals = scipy.sparse.linalg.eigs(op, k=k, which="LM", return_eigenvectors=False, tol=1e-12)
    vals = vals[np.argsort(-np.abs(vals))]
    return vals[:k]


def correlation_length(u):
    """-1 / log|lambda_2 / lambda_1| of the transfer matrix."""
    vals = transfer_spectrum(u, k=2)
    if len(vals) < 2 or abs(vals[1]) == 0:
        return 0.0
    ratio = abs(vals[1]) / abs(vals[0])
    return float(-1.0 / math.log(ratio)) if ratio < 1 else math.inf
