"""Single-site variational sweeps for finite chains.

Every local step solves the generalised problem ``H_eff v = E N_eff v``
where both maps come from contracting all other sites of the closed chain.
For open chains in mixed gauge ``N_eff`` is the identity; on periodic
chains it is not, and it is often close to singular. The solver keeps only
the metric eigenmodes above a relative floor and diagonalises ``H_eff`` in
that retained subspace.

Environments are stored as follows. A left environment covering sites
``0..x-1`` has shape ``(P, alpha, w, beta)`` where ``P`` runs over the
closing bond (bra, MPO, ket) on the far left, and a right environment has
shape ``(alpha, w, beta, P)``. Tracing ``P`` joins the two.
"""
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import mps as _mps
from .errors import (ConditioningError, NumericError, SectorWarning, StaleEnvironmentError,
                     ValidationError)
from .model import classical_vev, local_operator, validate
from .mpo import build_hamiltonian_mpo
from .tensor import lanczos_lowest


@dataclass(frozen=True)
class SweepConfig:
    """Knobs for :func:`minimize`.

    ``energy_tol`` is the relative energy change per full sweep that stops
    the run. ``metric_regularization`` is the floor, relative to the largest
    metric eigenvalue, below which metric modes are discarded.
    """

    chi: int = 8
    max_sweeps: int = 200
    min_sweeps: int = 2
    energy_tol: float = 1e-9
    metric_regularization: float = 1e-10
    local_solver: str = "dense"
    lanczos_tol: float = 1e-8
    init: str = "random"
    noise: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.chi < 1:
            raise ValidationError(f"chi must be >= 1 (got {self.chi})")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be >= 1")
        if not (self.energy_tol > 0 and self.metric_regularization > 0 and self.lanczos_tol > 0):
            raise ValidationError("tolerances must be > 0")
        if self.local_solver not in ("dense", "iterative"):
            raise ValidationError(f"local_solver must be 'dense' or 'iterative' (got {self.local_solver!r})")
        if self.init not in ("random", "kink"):
            raise ValidationError(f"init must be 'random' or 'kink' (got {self.init!r})")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class GroundResult:
    """Outcome of a minimisation.

    ``spatial_variance`` holds the spatial standard deviation of the
    per-site expectations (keys ``phi`` and ``phi_sq``); the profiles
    themselves are in ``phi_profile`` and ``phi_sq_profile``.
    """

    state: _mps.FiniteMPS
    energy: float
    energy_history: list
    spatial_variance: dict
    converged: bool
    update_energies: list = field(default_factory=list)
    phi_profile: np.ndarray = None
    phi_sq_profile: np.ndarray = None
    sweeps: int = 0
    seconds: float = 0.0


# --------------------------------------------------------------------------
# effective operators
# --------------------------------------------------------------------------

class EffectiveOperators:
    """H_eff and N_eff for one site, as matrix-free maps and dense matrices.

    Vectors are site tensors ``(d, chi_l, chi_r)`` flattened in C order.
    """

    def __init__(self, left_h, right_h, left_n, right_n, w, shape):
        self.env = np.tensordot(left_h, right_h, axes=([0], [3]))   # al wl bl ar wr br
        n4 = np.tensordot(left_n, right_n, axes=([0], [2]))          # al bl ar br
        cl, cr = n4.shape[0], n4.shape[2]
        nm = n4.transpose(0, 2, 1, 3).reshape(cl * cr, cl * cr)
        self.norm_matrix = 0.5 * (nm + nm.T)
        self.w = w
        self.shape = shape
        self.dim = int(np.prod(shape))
        # (al ar) x (wl bl wr br), laid out once so every matvec is one GEMM
        self._env_matrix = np.ascontiguousarray(
            self.env.transpose(0, 3, 1, 2, 4, 5)).reshape(cl * cr, -1)

    def matvec(self, v):
        d = self.shape[0]
        v = np.asarray(v, dtype=float).reshape(self.shape)
        t = np.tensordot(self.w, v, axes=([1], [0]))                 # n wl wr bl br
        t = t.transpose(1, 3, 2, 4, 0).reshape(-1, d)
        return (self._env_matrix @ t).T.ravel()

    def norm_matvec(self, v):
        v = np.asarray(v, dtype=float).reshape(self.shape[0], -1)
        return (v @ self.norm_matrix.T).ravel()

    def hamiltonian(self):
        """Dense symmetric H_eff."""
        d, cl, cr = self.shape
        t = np.tensordot(self.env, self.w, axes=([1, 4], [2, 3]))    # al bl ar br n m
        h = t.transpose(4, 0, 2, 5, 1, 3).reshape(self.dim, self.dim)
        return 0.5 * (h + h.T)

    def metric(self):
        """Dense N_eff = I_d (x) N."""
        return np.kron(np.eye(self.shape[0]), self.norm_matrix)


def _first_envs(psi, mpo):
    c = psi.sites[0].shape[1]
    cw = mpo.sites[0].shape[2]
    left_h = _mps._eye_env(c, cw, c)
    left_n = _mps._eye_env(c, c)
    return left_h, left_n


def _last_envs(psi, mpo):
    c = psi.sites[-1].shape[2]
    cw = mpo.sites[-1].shape[3]
    right_h = _mps._eye_env(c, cw, c).transpose(1, 2, 3, 0)
    right_n = _mps._eye_env(c, c).transpose(1, 2, 0)
    return right_h, right_n


def _scaled_pair(h, n):
    s = float(np.max(np.abs(n)))
    if not math.isfinite(s) or s == 0.0:
        raise NumericError("norm environment vanished or overflowed")
    return h / s, n / s


class Environments:
    """Left/right environment caches for a state and an MPO.

    H and N environments at the same position are rescaled by a common
    factor, so their ratio (what the local eigenproblem sees) is exact.
    """

    def __init__(self, psi, mpo):
        if mpo.L != psi.L or mpo.d != psi.d:
            raise ValidationError("MPO and state sizes differ")
        self.psi = psi
        self.mpo = mpo
        L = psi.L
        self.left_h = [None] * (L + 1)
        self.left_n = [None] * (L + 1)
        self.right_h = [None] * (L + 1)
        self.right_n = [None] * (L + 1)
        self.left_h[0], self.left_n[0] = _first_envs(psi, mpo)
        self.right_h[L], self.right_n[L] = _last_envs(psi, mpo)
        self._stamp = [None] * L

    def fingerprint(self, x):
        m = self.psi.sites[x]
        return (m.shape, hash(m.tobytes()))

    def grow_left(self, x):
        """Build left environment x + 1 from x using the current site x."""
        m = self.psi.sites[x]
        w = self.mpo.sites[x]
        h = _mps.left_op_step(self.left_h[x], m, w, m)
        n = _mps.left_step(self.left_n[x], m, m)
        self.left_h[x + 1], self.left_n[x + 1] = _scaled_pair(h, n)
        self._stamp[x] = self.fingerprint(x)

    def grow_right(self, x):
        """Build right environment x from x + 1 using the current site x."""
        m = self.psi.sites[x]
        w = self.mpo.sites[x]
        h = _mps.right_op_step(self.right_h[x + 1], m, w, m)
        n = _mps.right_step(self.right_n[x + 1], m, m)
        self.right_h[x], self.right_n[x] = _scaled_pair(h, n)
        self._stamp[x] = self.fingerprint(x)

    def build_all(self, site):
        for x in range(site):
            self.grow_left(x)
        for x in range(self.psi.L - 1, site, -1):
            self.grow_right(x)

    def check(self, site):
        for x in range(self.psi.L):
            if x != site and self._stamp[x] != self.fingerprint(x):
                raise StaleEnvironmentError(f"environment for site {x} was built from a different tensor")

    def operators(self, site, check=False):
        if check:
            self.check(site)
        if self.left_h[site] is None or self.right_h[site + 1] is None:
            raise StaleEnvironmentError(f"environments around site {site} have not been built")
        return EffectiveOperators(self.left_h[site], self.right_h[site + 1],
                                  self.left_n[site], self.right_n[site + 1],
                                  self.mpo.sites[site], self.psi.sites[site].shape)


def effective_operators(psi, H, site, envs=None):
    """(H_eff, N_eff) for ``site`` as dense symmetric matrices.

    With ``envs`` given, the cached environments are checked against the
    current tensors and a :class:`StaleEnvironmentError` is raised if any
    site other than ``site`` has changed since they were built.
    """
    if not 0 <= site < psi.L:
        raise ValueError(f"site {site} out of range")
    if envs is None:
        envs = Environments(psi, H)
        envs.build_all(site)
    ops = envs.operators(site, check=True)
    return ops.hamiltonian(), ops.metric()


# --------------------------------------------------------------------------
# local solve
# --------------------------------------------------------------------------

def _retained_basis(norm_matrix, floor):
    s, u = np.linalg.eigh(norm_matrix)
    top = s[-1] if len(s) else 0.0
    if not top > 0:
        raise ConditioningError("metric has no positive eigenvalues")
    keep = s > floor * top
    if not np.any(keep):
        raise ConditioningError("no metric modes survive the regularisation floor")
    return u[:, keep] / np.sqrt(s[keep]), u[:, keep] * np.sqrt(s[keep])


def solve_local(h_eff, n_eff, config=None, v0=None, dim=None, norm_block=None):
    """Lowest generalised eigenpair of ``H_eff v = E N_eff v``.

    ``h_eff`` is a dense matrix or a matvec function (then ``dim`` is
    needed). ``n_eff`` is a dense metric, or None together with
    ``norm_block`` = N when N_eff = I_d (x) N. Metric modes below
    ``config.metric_regularization`` times the largest eigenvalue are
    discarded and the problem is solved in the retained subspace.
    Returns ``(v, E)`` with ``v`` normalised to ``v N_eff v = 1``.
    """
    config = config or SweepConfig()
    floor = config.metric_regularization
    if norm_block is None:
        n_eff = np.asarray(n_eff, dtype=float)
        proj, back = _retained_basis(0.5 * (n_eff + n_eff.T), floor)
        reps = 1
    else:
        proj, back = _retained_basis(norm_block, floor)
        reps = None
    dense_h = not callable(h_eff)
    if dense_h:
        h_eff = np.asarray(h_eff, dtype=float)
        dim = h_eff.shape[0]
    if reps is None:
        reps = dim // proj.shape[0]
    k = proj.shape[1]
    nb = proj.shape[0]

    def lift(y):
        return (y.reshape(reps, k) @ proj.T).ravel()

    def lower(v):
        return (v.reshape(reps, nb) @ proj).ravel()

    if config.local_solver == "dense" or reps * k <= 64:
        if dense_h:
            hb = h_eff.reshape(reps, nb, reps, nb)
            hr = np.einsum("aibj,ik,jl->akbl", hb, proj, proj).reshape(reps * k, reps * k)
        else:
            cols = [lower(h_eff(lift(e))) for e in np.eye(reps * k)]
            hr = np.array(cols).T
        hr = 0.5 * (hr + hr.T)
        w, y = scipy.linalg.eigh(hr, subset_by_index=[0, 0])
        energy, y = float(w[0]), y[:, 0]
    else:
        apply = (lambda v: h_eff @ v) if dense_h else h_eff
        y0 = None
        if v0 is not None:
            y0 = (np.asarray(v0, dtype=float).reshape(reps, nb) @ back).ravel()
            if not np.linalg.norm(y0) > 0:
                y0 = None
        w, y, _ = lanczos_lowest(lambda t: lower(apply(lift(t))), reps * k, k=1,
                                 tol=config.lanczos_tol, v0=y0, seed=config.seed)
        energy, y = float(w[0]), y[:, 0]
    if not math.isfinite(energy):
        raise NumericError("local eigenvalue is not finite")
    v = lift(y / np.linalg.norm(y))
    return v, energy


def _solve_site(ops, config, v0):
    if config.local_solver == "dense":
        return solve_local(ops.hamiltonian(), None, config, norm_block=ops.norm_matrix)
    return solve_local(ops.matvec, None, config, v0=v0, dim=ops.dim, norm_block=ops.norm_matrix)


# --------------------------------------------------------------------------
# initial states
# --------------------------------------------------------------------------

def kink_profile(spec, x0=None):
    """Classical field profile used to seed TPBC runs (vacuum value otherwise)."""
    v = classical_vev(spec.mu0_sq, spec.lambda0)
    if v == 0.0:
        return np.zeros(spec.L)
    if spec.boundary != "TPBC":
        return np.full(spec.L, v)
    mu = math.sqrt(-spec.mu0_sq)
    x0 = 0.5 * (spec.L - 1) if x0 is None else x0
    return v * np.tanh(mu * (np.arange(spec.L) - x0) / math.sqrt(2.0))


def initial_state(spec, config):
    if config.init == "kink":
        states = [_mps.coherent_state(spec.d, f) for f in kink_profile(spec)]
        psi = _mps.product_mps(states, spec.boundary)
        return _mps.embed(psi, config.chi, noise=config.noise, seed=config.seed)
    return _mps.random_mps(spec, config.chi, seed=config.seed)


def _right_normalise(psi):
    out = psi.copy()
    for x in range(out.L - 1, 0, -1):
        out.sites[x], out.sites[x - 1] = _mps.move_left(out.sites[x], out.sites[x - 1])
    out.sites[0] = out.sites[0] / _mps.norm(out)
    return out


# --------------------------------------------------------------------------
# sweeping
# --------------------------------------------------------------------------

def spatial_profiles(psi):
    phi = _mps.site_expectations(psi, local_operator("phi", psi.d))
    phi_sq = _mps.site_expectations(psi, local_operator("phi_sq", psi.d))
    return phi, phi_sq


def minimize(spec, H=None, config=None, init=None, callback=None):
    """Sweep single-site updates left to right and back until the energy settles.

    ``init`` may be a :class:`FiniteMPS` to start from; otherwise
    ``config.init`` picks a random or kink-profile start. Returns the state
    with the lowest energy seen.
    """
    t0 = time.perf_counter()
    spec = validate(spec, warn=False)
    config = config or SweepConfig()
    H = build_hamiltonian_mpo(spec) if H is None else H
    psi = init.copy() if init is not None else initial_state(spec, config)
    if psi.L != spec.L or psi.d != spec.d:
        raise ValidationError("initial state does not match the model size")
    psi.boundary = spec.boundary
    if not all(np.all(np.isfinite(m)) for m in psi.sites):
        raise NumericError("non-finite entries in the initial state (sweep 0)")
    psi = _right_normalise(psi)
    L = psi.L
    envs = Environments(psi, H)
    for x in range(L - 1, 0, -1):
        envs.grow_right(x)

    history, updates = [], []
    best = (math.inf, None)
    energy = math.nan
    converged = False
    sweep = 0
    for sweep in range(1, config.max_sweeps + 1):
        schedule = [(x, True) for x in range(L - 1)] + [(x, False) for x in range(L - 1, 0, -1)]
        for x, forward in schedule:
            try:
                v, energy = _solve_site(envs.operators(x), config, psi.sites[x].ravel())
                _check(energy, sweep, x)
                m = v.reshape(psi.sites[x].shape)
                if forward:
                    psi.sites[x], psi.sites[x + 1] = _mps.move_right(m, psi.sites[x + 1])
                    envs.grow_left(x)
                else:
                    psi.sites[x], psi.sites[x - 1] = _mps.move_left(m, psi.sites[x - 1])
                    envs.grow_right(x)
            except (ValueError, np.linalg.LinAlgError, ConditioningError) as exc:
                raise NumericError(f"local update failed in sweep {sweep} at site {x}: {exc}") from exc
            updates.append(energy)
        history.append(energy)
        if energy < best[0]:
            best = (energy, psi.copy())
        if callback is not None:
            callback(sweep, energy)
        if sweep >= config.min_sweeps and len(history) > 1:
            change = abs(history[-2] - history[-1]) / max(abs(history[-1]), 1e-300)
            if change < config.energy_tol:
                converged = True
                break
    state = _mps.normalize(best[1])
    state.gauge = "right" if not state.traced else "none"
    state.center = 0
    state.meta = {"chi": config.chi, "d": spec.d, "boundary": spec.boundary}
    phi, phi_sq = spatial_profiles(state)
    return GroundResult(
        state=state, energy=float(best[0]), energy_history=history,
        spatial_variance={"phi": float(np.std(phi)), "phi_sq": float(np.std(phi_sq))},
        converged=converged, update_energies=updates, phi_profile=phi, phi_sq_profile=phi_sq,
        sweeps=sweep, seconds=time.perf_counter() - t0)


def _check(energy, sweep, site):
    if not math.isfinite(energy):
        raise NumericError(f"energy became non-finite in sweep {sweep} at site {site}")


# --------------------------------------------------------------------------
# kink mass
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KinkMass:
    """M_K = E(TPBC) - L e_vac with the inputs that produced it."""

    value: float
    kink_energy: float
    vacuum_energy_density: float
    vacuum_source: str
    chi: int
    d: int
    L: int
    kink: GroundResult = None

    def __float__(self):
        return self.value


def kink_mass(spec_tpbc, vacuum_energy_density=None, config=None, vacuum="umps",
              umps_options=None, tol=1e-6, kink_result=None):
    """Kink mass from the twisted-sector energy and a vacuum energy density.

    With ``vacuum_energy_density`` None it is computed here: ``vacuum="umps"``
    uses the infinite-volume uniform state at the same bond dimension,
    ``vacuum="pbc"`` the periodic chain of the same length. A clearly
    negative result triggers a :class:`SectorWarning`.
    """
    import warnings

    spec = validate(spec_tpbc, warn=False)
    if spec.boundary != "TPBC":
        raise ValidationError("kink_mass needs a TPBC spec")
    config = config or SweepConfig()
    source = "given"
    if vacuum_energy_density is None:
        if vacuum == "pbc":
            vac = minimize(spec.with_(boundary="PBC"), config=config)
            vacuum_energy_density = vac.energy / spec.L
        elif vacuum == "umps":
            from .umps import umps_minimize
            u = umps_minimize(spec, config.chi, **(umps_options or {}))
            vacuum_energy_density = u.energy
        else:
            raise ValidationError(f"vacuum must be 'umps' or 'pbc' (got {vacuum!r})")
        source = vacuum
    kink = kink_result if kink_result is not None else minimize(spec, config=config)
    value = kink.energy - spec.L * vacuum_energy_density
    if value < -tol * max(1.0, abs(kink.energy)):
        warnings.warn(f"negative kink mass {value:.4g}; the vacuum energy density is probably unconverged",
                      SectorWarning, stacklevel=2)
    return KinkMass(float(value), kink.energy, float(vacuum_energy_density), source,
                    config.chi, spec.d, spec.L, kink)
