"""Finite matrix product states.

Site tensors have shape ``(d, chi_left, chi_right)``. The chain is closed
by a trace over the bond between the last and first site; an open-boundary
state is one whose closing bond has extent 1. ``boundary`` records the
model's boundary condition, which fixes how separations wrap when
correlators are measured (and the sign picked up across a twist).

All transfer-matrix products are rescaled as they are accumulated and the
scale is carried in log form, so long periodic chains neither overflow nor
underflow.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import DimensionError, SizeError, UnsupportedGaugeError
from .model import local_operator

DENSE_CAP = 4096


@dataclass
class FiniteMPS:
    sites: list
    boundary: str = "PBC"
    gauge: str = "none"
    center: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sites = [np.asarray(m, dtype=float) for m in self.sites]
        n = len(self.sites)
        for x, m in enumerate(self.sites):
            if m.ndim != 3:
                raise DimensionError(f"site {x} has rank {m.ndim}, expected 3")
            if m.shape[2] != self.sites[(x + 1) % n].shape[1]:
                raise DimensionError(
                    f"bond {x}->{(x + 1) % n}: {m.shape[2]} != {self.sites[(x + 1) % n].shape[1]}")

    @property
    def L(self):
        return len(self.sites)

    @property
    def d(self):
        return self.sites[0].shape[0]

    @property
    def bond_dims(self):
        return [m.shape[1] for m in self.sites] + [self.sites[-1].shape[2]]

    @property
    def chi(self):
        return max(self.bond_dims)

    @property
    def traced(self):
        """True when the closing bond carries more than one state."""
        return self.sites[0].shape[1] > 1

    def copy(self):
        return replace(self, sites=[m.copy() for m in self.sites], meta=dict(self.meta))


# --------------------------------------------------------------------------
# one-site transfer steps; bra tensor ``a``, ket tensor ``b``
# --------------------------------------------------------------------------

def left_step(env, a, b, op=None):
    """(P, alpha, beta) -> (P, alpha', beta') through one site."""
    if op is not None:
        b = np.tensordot(op, b, axes=([1], [0]))
    t = np.tensordot(env, b, axes=([2], [1]))            # P, al, n, br
    t = np.tensordot(t, a, axes=([1, 2], [1, 0]))        # P, br, ar
    return t.transpose(0, 2, 1)


def right_step(env, a, b, op=None):
    """(alpha', beta', P) -> (alpha, beta, P) through one site."""
    if op is not None:
        b = np.tensordot(op, b, axes=([1], [0]))
    t = np.tensordot(b, env, axes=([2], [1]))            # n, bl, ar, P
    return np.tensordot(a, t, axes=([0, 2], [0, 2]))     # al, bl, P


def left_op_step(env, a, w, b):
    """(P, alpha, w, beta) -> (P, alpha', w', beta') through one MPO site."""
    t = np.tensordot(env, b, axes=([3], [1]))            # P, al, wl, m, br
    t = np.tensordot(t, w, axes=([2, 3], [2, 1]))        # P, al, br, n, wr
    t = np.tensordot(t, a, axes=([1, 3], [1, 0]))        # P, br, wr, ar
    return t.transpose(0, 3, 2, 1)


def right_op_step(env, a, w, b):
    """(alpha', w', beta', P) -> (alpha, w, beta, P) through one MPO site."""
    t = np.tensordot(b, env, axes=([2], [2]))            # m, bl, ar, wr, P
    t = np.tensordot(w, t, axes=([1, 3], [0, 3]))        # n, wl, bl, ar, P
    t = np.tensordot(a, t, axes=([0, 2], [0, 3]))        # al, wl, bl, P
    return t


def _eye_env(*dims):
    """Identity on a bond, as (P, *dims) with P = prod(dims)."""
    p = int(np.prod(dims))
    return np.eye(p).reshape((p,) + tuple(dims))


def _rescale(t):
    s = float(np.max(np.abs(t)))
    if s == 0.0 or not math.isfinite(s):
        return t, 0.0
    return t / s, math.log(s)


def _closing_trace(env):
    """Trace over the closing bond of a full left-to-right product."""
    p = env.shape[0]
    return float(np.trace(env.reshape(p, p)))


def transfer_matrix(a, b=None, w=None):
    """Dense transfer matrix E^a_b[w] as a (chi^2 chi_W) x (chi^2 chi_W) matrix.

    Row index is the left bond (alpha, w, beta), column index the right bond.
    """
    b = a if b is None else b
    if w is None:
        t = np.einsum("nab,ncd->acbd", a, b)
        s = t.shape
        return t.reshape(s[0] * s[1], s[2] * s[3])
    t = np.einsum("nab,nmvw,mcd->avcbwd", a, w, b)
    s = t.shape
    return t.reshape(s[0] * s[1] * s[2], s[3] * s[4] * s[5])


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

def _bond_dims(L, d, chi, periodic):
    if periodic:
        return [chi] * (L + 1)
    dims = [1]
    for x in range(1, L):
        dims.append(int(min(chi, d ** min(x, L - x))))
    dims.append(1)
    return dims


def random_mps(spec, chi, seed=0):
    """Random normalised state; uniform ``chi`` for periodic specs, open form otherwise."""
    if chi < 1:
        raise ValueError("chi must be >= 1")
    rng = np.random.default_rng(seed)
    dims = _bond_dims(spec.L, spec.d, chi, spec.periodic)
    sites = [rng.standard_normal((spec.d, dims[x], dims[x + 1])) for x in range(spec.L)]
    return normalize(FiniteMPS(sites, spec.boundary))


def product_mps(local_states, boundary="PBC", chi=1):
    """Product state from per-site vectors, optionally zero-padded to ``chi``."""
    c = 1 if boundary == "OBC" else chi
    sites = []
    for v in local_states:
        m = np.zeros((len(v), c, c))
        m[:, 0, 0] = v
        sites.append(m)
    return normalize(FiniteMPS(sites, boundary))


def coherent_state(d, mean_phi):
    """Truncated oscillator coherent state with <phi> ~ mean_phi (normalised)."""
    alpha = mean_phi / math.sqrt(2.0)
    v = np.zeros(d)
    if alpha == 0:
        v[0] = 1.0
        return v
    n = np.arange(d)
    logfact = np.array([math.lgamma(k + 1) for k in n])
    v = np.exp(n * math.log(abs(alpha)) - 0.5 * logfact) * np.sign(alpha) ** n
    return v / np.linalg.norm(v)


def embed(psi, chi, noise=1e-4, seed=0):
    """Pad every traced/internal bond up to ``chi`` with zeros plus noise."""
    rng = np.random.default_rng(seed)
    dims = psi.bond_dims
    periodic = psi.traced or psi.boundary != "OBC"
    new = _bond_dims(psi.L, psi.d, chi, periodic)
    new = [max(a, b) for a, b in zip(new, dims)]
    sites = []
    for x, m in enumerate(psi.sites):
        scale = np.max(np.abs(m))
        t = noise * scale * rng.standard_normal((psi.d, new[x], new[x + 1]))
        t[:, :m.shape[1], :m.shape[2]] += m
        sites.append(t)
    return normalize(FiniteMPS(sites, psi.boundary))


def to_dense(psi, cap=DENSE_CAP):
    """Full amplitude vector (site 1 most significant)."""
    if psi.d ** psi.L > cap:
        raise SizeError(f"d^L = {psi.d ** psi.L} exceeds the dense cap {cap}")
    acc = psi.sites[0]                                   # (n, a0, a)
    for m in psi.sites[1:]:
        acc = np.tensordot(acc, m, axes=([2], [1]))      # (n.., a0, n, b)
        acc = acc.transpose(0, 2, 1, 3)
        s = acc.shape
        acc = acc.reshape(s[0] * s[1], s[2], s[3])
    return np.trace(acc, axis1=1, axis2=2)


def from_dense(vec, d, L, boundary="PBC", chi=None, cutoff=0.0):
    """Open-form MPS of a dense vector by successive SVDs."""
    vec = np.asarray(vec, dtype=float)
    if vec.size != d ** L:
        raise DimensionError(f"vector of length {vec.size} is not d^L = {d ** L}")
    sites = []
    rest = vec.reshape(1, -1)
    for x in range(L - 1):
        left = rest.shape[0]
        mat = rest.reshape(left * d, -1)
        u, s, vt = scipy.linalg.svd(mat, full_matrices=False)
        keep = len(s)
        if cutoff > 0:
            keep = max(1, int(np.count_nonzero(s > cutoff * s[0])))
        if chi is not None:
            keep = min(keep, chi)
        sites.append(u[:, :keep].reshape(left, d, keep).transpose(1, 0, 2))
        rest = s[:keep, None] * vt[:keep]
    sites.append(rest.reshape(rest.shape[0], d, 1).transpose(1, 0, 2))
    return FiniteMPS(sites, boundary, gauge="left", center=L - 1)


# --------------------------------------------------------------------------
# contractions
# --------------------------------------------------------------------------

def log_overlap(phi, psi):
    """(sign, log|<phi|psi>|) by left-to-right transfer products."""
    if phi.L != psi.L or phi.d != psi.d:
        raise DimensionError("states have different L or d")
    env = _eye_env(phi.sites[0].shape[1], psi.sites[0].shape[1])
    logs = 0.0
    for a, b in zip(phi.sites, psi.sites):
        env, s = _rescale(left_step(env, a, b))
        logs += s
    tr = _closing_trace(env)
    if tr == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, tr), logs + math.log(abs(tr))


def overlap(phi, psi):
    sign, logv = log_overlap(phi, psi)
    return sign * math.exp(logv) if math.isfinite(logv) else 0.0


def overlap_right_to_left(phi, psi):
    """Same value as :func:`overlap`, contracted from the right end."""
    env = _eye_env(phi.sites[-1].shape[2], psi.sites[-1].shape[2]).transpose(1, 2, 0)
    logs = 0.0
    for a, b in zip(reversed(phi.sites), reversed(psi.sites)):
        env, s = _rescale(right_step(env, a, b))
        logs += s
    p = env.shape[2]
    tr = float(np.trace(env.reshape(p, p)))
    return tr * math.exp(logs)


def norm(psi):
    sign, logv = log_overlap(psi, psi)
    return math.exp(0.5 * logv)


def normalize(psi):
    """Rescale every site equally so that <psi|psi> = 1."""
    _, logv = log_overlap(psi, psi)
    factor = math.exp(-0.5 * logv / psi.L)
    out = psi.copy()
    out.sites = [m * factor for m in out.sites]
    return out


def log_matrix_element(psi, mpo, phi=None):
    """(sign, log|<psi|O|phi>|) for an MPO, left-to-right with a closing trace."""
    phi = psi if phi is None else phi
    if mpo.L != psi.L or mpo.d != psi.d:
        raise DimensionError(f"MPO (L={mpo.L}, d={mpo.d}) does not fit state (L={psi.L}, d={psi.d})")
    env = _eye_env(psi.sites[0].shape[1], mpo.sites[0].shape[2], phi.sites[0].shape[1])
    logs = 0.0
    for a, w, b in zip(psi.sites, mpo.sites, phi.sites):
        env, s = _rescale(left_op_step(env, a, w, b))
        logs += s
    tr = _closing_trace(env)
    if tr == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, tr), logs + math.log(abs(tr))


def expectation(psi, mpo):
    """<psi|O|psi> / <psi|psi>."""
    s1, l1 = log_matrix_element(psi, mpo)
    _, l0 = log_overlap(psi, psi)
    if s1 == 0.0:
        return 0.0
    return s1 * math.exp(l1 - l0)


def expectation_right_to_left(psi, mpo):
    env = _eye_env(psi.sites[-1].shape[2], mpo.sites[-1].shape[3], psi.sites[-1].shape[2])
    env = env.transpose(1, 2, 3, 0)
    logs = 0.0
    for a, w in zip(reversed(psi.sites), reversed(mpo.sites)):
        env, s = _rescale(right_op_step(env, a, w, a))
        logs += s
    p = env.shape[3]
    tr = float(np.trace(env.reshape(p, p)))
    _, l0 = log_overlap(psi, psi)
    return tr * math.exp(logs - l0)


class _NormEnvironments:
    """Prefix/suffix norm environments with their log scales."""

    def __init__(self, psi):
        self.psi = psi
        L = psi.L
        c0 = psi.sites[0].shape[1]
        self.left = [None] * (L + 1)
        self.left_log = np.zeros(L + 1)
        self.left[0] = _eye_env(c0, c0)
        for x in range(L):
            m = psi.sites[x]
            self.left[x + 1], s = _rescale(left_step(self.left[x], m, m))
            self.left_log[x + 1] = self.left_log[x] + s
        self.right = [None] * (L + 1)
        self.right_log = np.zeros(L + 1)
        self.right[L] = _eye_env(c0, c0).transpose(1, 2, 0)
        for x in range(L - 1, -1, -1):
            m = psi.sites[x]
            self.right[x], s = _rescale(right_step(self.right[x + 1], m, m))
            self.right_log[x] = self.right_log[x + 1] + s
        self.log_norm_sq = self.left_log[L] + math.log(abs(_closing_trace(self.left[L])))

    def close(self, env, x, log_env):
        """Value of a left object ending at bond x, joined with the right environment."""
        val = np.tensordot(env, self.right[x], axes=([1, 2], [0, 1]))
        tr = float(np.trace(val))
        return tr * math.exp(log_env + self.right_log[x] - self.log_norm_sq)


def site_expectations(psi, op):
    """<O_x> at every site for a single-site operator matrix ``op``."""
    envs = _NormEnvironments(psi)
    out = np.empty(psi.L)
    for x, m in enumerate(psi.sites):
        t = left_step(envs.left[x], m, m, op=op)
        out[x] = envs.close(t, x + 1, envs.left_log[x])
    return out


def two_point_matrix(psi, op_a, op_b=None, envs=None):
    """Full matrix C[x, y] = <A_x B_y> for x < y (upper triangle, in site order).

    The diagonal holds <A_x B_x> as a product of the two matrices on one site.
    """
    op_b = op_a if op_b is None else op_b
    envs = envs or _NormEnvironments(psi)
    L = psi.L
    out = np.zeros((L, L))
    for x in range(L):
        mx = psi.sites[x]
        out[x, x] = envs.close(left_step(envs.left[x], mx, mx, op=op_a @ op_b), x + 1, envs.left_log[x])
        env, s = _rescale(left_step(envs.left[x], mx, mx, op=op_a))
        log_env = envs.left_log[x] + s
        for y in range(x + 1, L):
            my = psi.sites[y]
            out[x, y] = envs.close(left_step(env, my, my, op=op_b), y + 1, log_env)
            if y < L - 1:
                env, s = _rescale(left_step(env, my, my))
                log_env += s
    return out


def pair_sign(boundary, wrapped):
    return -1.0 if (wrapped and boundary == "TPBC") else 1.0


def connected_two_point(psi, r_max, boundary=None, means=None, pairs=None):
    """Spatially averaged G2(r) = <phi_x phi_{x+r}> - <phi_x><phi_{x+r}>, r = 1..r_max.

    Periodic boundaries wrap ``x + r`` around the chain (so G2(r) = G2(L-r));
    a wrapped pair in TPBC is multiplied by -1 to undo the twist. Open
    boundaries average only over pairs inside the chain.
    """
    boundary = psi.boundary if boundary is None else boundary
    L = psi.L
    if not 1 <= r_max < L:
        raise ValueError(f"r_max must satisfy 1 <= r_max < L = {L} (got {r_max})")
    phi = local_operator("phi", psi.d)
    envs = _NormEnvironments(psi)
    if means is None:
        means = site_expectations(psi, phi)
    if pairs is None:
        pairs = two_point_matrix(psi, phi, envs=envs)
    periodic = boundary in ("PBC", "TPBC")
    g2 = np.empty(r_max)
    for r in range(1, r_max + 1):
        vals = []
        for x in range(L):
            y = x + r
            wrapped = y >= L
            if wrapped and not periodic:
                continue
            y %= L
            lo, hi = min(x, y), max(x, y)
            vals.append(pair_sign(boundary, wrapped) * (pairs[lo, hi] - means[x] * means[y]))
        g2[r - 1] = np.mean(vals)
    return g2


# --------------------------------------------------------------------------
# gauge
# --------------------------------------------------------------------------

def _require_open(psi):
    if psi.traced or psi.sites[-1].shape[2] != 1:
        raise UnsupportedGaugeError("gauge fixing needs an open-form state (closing bond of extent 1)")


def move_right(m, nxt):
    """QR on ``m`` (made left-isometric); the R factor is pushed into ``nxt``."""
    d, cl, cr = m.shape
    q, r = scipy.linalg.qr(m.reshape(d * cl, cr), mode="economic")
    k = q.shape[1]
    q_site = q.reshape(d, cl, k)
    nxt = np.tensordot(r, nxt, axes=([1], [1])).transpose(1, 0, 2)
    return q_site, nxt


def move_left(m, prev):
    """LQ on ``m`` (made right-isometric); the L factor is pushed into ``prev``."""
    d, cl, cr = m.shape
    mat = m.transpose(1, 0, 2).reshape(cl, d * cr)
    q, r = scipy.linalg.qr(mat.T, mode="economic")      # mat = r^T q^T
    k = q.shape[1]
    q_site = q.T.reshape(k, d, cr).transpose(1, 0, 2)
    prev = np.tensordot(prev, r.T, axes=([2], [0]))
    return q_site, prev


def canonicalize(psi, gauge="left", center=None):
    """Left-, right- or mixed-canonical form of an open-form state.

    The state is unchanged as a vector; the norm ends up in the last site
    (left), first site (right) or the centre site (mixed).
    """
    _require_open(psi)
    out = psi.copy()
    s = out.sites
    L = out.L
    if gauge == "left":
        stop_l, stop_r = L - 1, L - 1
    elif gauge == "right":
        stop_l, stop_r = 0, 0
    elif gauge == "mixed":
        if center is None or not 0 <= center < L:
            raise ValueError(f"mixed gauge needs a centre in [0, {L})")
        stop_l, stop_r = center, center
    else:
        raise ValueError(f"unknown gauge {gauge!r}")
    for x in range(stop_l):
        s[x], s[x + 1] = move_right(s[x], s[x + 1])
    for x in range(L - 1, stop_r, -1):
        s[x], s[x - 1] = move_left(s[x], s[x - 1])
    out.gauge = gauge
    out.center = {"left": L - 1, "right": 0}.get(gauge, center)
    return out


def is_left_isometric(m, tol=1e-10):
    d, cl, cr = m.shape
    mat = m.reshape(d * cl, cr)
    return np.allclose(mat.T @ mat, np.eye(cr), atol=tol)


def is_right_isometric(m, tol=1e-10):
    d, cl, cr = m.shape
    mat = m.transpose(1, 0, 2).reshape(cl, d * cr)
    return np.allclose(mat @ mat.T, np.eye(cl), atol=tol)


def apply_gauge(psi, bond, g):
    """Insert G G^-1 on the bond between site ``bond - 1`` and ``bond`` (mod L)."""
    out = psi.copy()
    L = out.L
    left = (bond - 1) % L
    right = bond % L
    out.sites[left] = np.tensordot(out.sites[left], g, axes=([2], [0]))
    ginv = np.linalg.inv(g)
    out.sites[right] = np.tensordot(ginv, out.sites[right], axes=([1], [1])).transpose(1, 0, 2)
    out.gauge = "none"
    return out


def schmidt_values(psi, bond):
    """Normalised Schmidt coefficients across the cut left of site ``bond``."""
    _require_open(psi)
    if not 1 <= bond < psi.L:
        raise ValueError(f"bond must be in [1, {psi.L - 1}]")
    c = canonicalize(psi, "mixed", center=bond - 1)
    m = c.sites[bond - 1]
    d, cl, cr = m.shape
    s = scipy.linalg.svdvals(m.reshape(d * cl, cr))
    return s / np.linalg.norm(s)


def entanglement_entropy(psi, bond):
    """Von Neumann entropy -sum s^2 log s^2 across the cut left of site ``bond``."""
    p = schmidt_values(psi, bond) ** 2
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))
