"""Exact diagonalisation reference for small lattices.

Hamiltonians here are assembled directly from Kronecker products of the
local operators, independently of the MPO construction, so they can be
used to check it.
"""
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import SizeError
from .model import ModelSpec, local_operator, onsite_hamiltonian, spec_onsite, validate

DENSE_CAP = 4096
ITERATIVE_CAP = 20000


@dataclass(frozen=True)
class DenseState:
    amplitudes: np.ndarray
    spec: ModelSpec


def bonds(spec):
    """(x, y, sign) for every nearest-neighbour term sign * phi_x phi_y in H."""
    out = [(x, x + 1, -1.0) for x in range(spec.L - 1)]
    if spec.boundary == "PBC":
        out.append((spec.L - 1, 0, -1.0))
    elif spec.boundary == "TPBC":
        out.append((spec.L - 1, 0, +1.0))
    return out


def _embed(ops, L, d):
    mats = [ops.get(x, np.eye(d)) for x in range(L)]
    return reduce(np.kron, mats)


def dense_hamiltonian(spec, cap=DENSE_CAP):
    """Explicit d^L x d^L Hamiltonian built from Kronecker sums."""
    spec = validate(spec, warn=False)
    d, L = spec.d, spec.L
    if d ** L > cap:
        raise SizeError(f"d^L = {d ** L} exceeds the dense cap {cap}")
    h = spec_onsite(spec)
    phi = local_operator("phi", d)
    H = np.zeros((d ** L, d ** L))
    for x in range(L):
        H += _embed({x: h}, L, d)
    for x, y, sign in bonds(spec):
        H += sign * _embed({x: phi, y: phi}, L, d)
    return H


def _apply_site(op, psi, x):
    """Apply a single-site operator to a state tensor of shape (d,)*L."""
    out = np.tensordot(op, psi, axes=([1], [x]))
    return np.moveaxis(out, 0, x)


def hamiltonian_action(spec):
    """Matrix-free ``v -> H v`` as a sum of local Kronecker actions."""
    d, L = spec.d, spec.L
    h = spec_onsite(spec)
    phi = local_operator("phi", d)
    terms = bonds(spec)

    def matvec(v):
        psi = np.asarray(v, dtype=float).reshape((d,) * L)
        out = np.zeros_like(psi)
        for x in range(L):
            out += _apply_site(h, psi, x)
        for x in range(L):
            px = _apply_site(phi, psi, x)
            for a, b, sign in terms:
                if a == x:
                    out += sign * _apply_site(phi, px, b)
        return out.ravel()

    return matvec


def dense_ground(spec, cap=None):
    """Lowest eigenpair of the Hamiltonian in the spec's boundary sector.

    Spaces up to ``cap`` (default 4096) are diagonalised densely, larger ones
    up to 20000 with a matrix-free Lanczos solve.
    """
    spec = validate(spec, warn=False)
    size = spec.d ** spec.L
    if size <= DENSE_CAP and (cap is None or size <= cap):
        w, v = scipy.linalg.eigh(dense_hamiltonian(spec), subset_by_index=[0, 0])
        return float(w[0]), DenseState(_fix_sign(v[:, 0]), spec)
    if size > ITERATIVE_CAP:
        raise SizeError(f"d^L = {size} exceeds the iterative cap {ITERATIVE_CAP}")
    op = scipy.sparse.linalg.LinearOperator((size, size), matvec=hamiltonian_action(spec), dtype=float)
    w, v = scipy.sparse.linalg.eigsh(op, k=1, which="SA", tol=1e-12)
    return float(w[0]), DenseState(_fix_sign(v[:, 0]), spec)


def dense_single_site(d, mu0_sq, lambda0, kinetic=True, spring=True):
    """Ground energy of one isolated site (no bonds).

    With ``spring`` the on-site term includes the nearest-neighbour
    diagonal piece (the 2 in (2 + mu0^2)/2 phi^2), i.e. the full h_onsite.
    """
    if spring:
        h = onsite_hamiltonian(d, mu0_sq, lambda0)
    else:
        h = (0.5 * local_operator("pi_sq", d) + 0.5 * mu0_sq * local_operator("phi_sq", d)
             + lambda0 / 24.0 * local_operator("phi_4", d))
    if not kinetic:
        h = h - 0.5 * local_operator("pi_sq", d)
    return float(np.linalg.eigvalsh(h)[0])


def _fix_sign(v):
    v = np.array(v, dtype=float)
    k = np.argmax(np.abs(v))
    return v if v[k] >= 0 else -v


def _expect_local(psi, op, x):
    return float(np.tensordot(psi, _apply_site(op, psi, x), axes=psi.ndim))


def dense_observables(state, which=("phi", "phi_sq", "G2", "energy"), r_max=None):
    """Local means, connected two-point function and energy of a dense state.

    Definitions match the MPS module: ``G2[r-1]`` averages
    <phi_x phi_{x+r}> - <phi_x><phi_{x+r}> over reference sites; periodic
    chains wrap, and in TPBC a wrapped pair picks up a factor -1.
    """
    spec = state.spec
    d, L = spec.d, spec.L
    if d ** L > ITERATIVE_CAP:
        raise SizeError(f"d^L = {d ** L} exceeds the cap {ITERATIVE_CAP}")
    psi = np.asarray(state.amplitudes, dtype=float).reshape((d,) * L)
    psi = psi / np.linalg.norm(psi)
    phi = local_operator("phi", d)
    out = {}
    means = np.array([_expect_local(psi, phi, x) for x in range(L)])
    if "phi" in which:
        out["phi"] = means
    if "phi_sq" in which:
        phi_sq = local_operator("phi_sq", d)
        out["phi_sq"] = np.array([_expect_local(psi, phi_sq, x) for x in range(L)])
    if "G2" in which:
        if r_max is None:
            r_max = L // 2 if spec.periodic else L - 1
        g2 = []
        for r in range(1, r_max + 1):
            vals = []
            for x in range(L):
                y = x + r
                sign = 1.0
                if y >= L:
                    if not spec.periodic:
                        continue
                    y -= L
                    if spec.boundary == "TPBC":
                        sign = -1.0
                pxy = _apply_site(phi, _apply_site(phi, psi, x), y)
                two = float(np.tensordot(psi, pxy, axes=psi.ndim))
                vals.append(sign * (two - means[x] * means[y]))
            g2.append(np.mean(vals))
        out["G2"] = np.array(g2)
    if "energy" in which:
        hv = hamiltonian_action(spec)(psi.ravel())
        out["energy"] = float(psi.ravel() @ hv)
    return out
