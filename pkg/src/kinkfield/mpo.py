"""Matrix product operators for the lattice Hamiltonian and product observables.

Site tensors have shape ``(d, d, chi_left, chi_right)`` with the first
physical index acting on the bra (row) side. The chain is always closed
with a trace over the bond joining site ``L`` back to site 1; open chains
simply have extent 1 on that bond.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SizeError
from .model import local_operator, spec_onsite, validate

DENSE_CAP = 4096


@dataclass(frozen=True)
class MPO:
    sites: tuple
    boundary: str = "PBC"

    def __post_init__(self):
        for x, w in enumerate(self.sites):
            if w.ndim != 4 or w.shape[0] != w.shape[1]:
                raise DimensionError(f"MPO site {x} has shape {w.shape}")
        n = len(self.sites)
        for x in range(n):
            right = self.sites[x].shape[3]
            left = self.sites[(x + 1) % n].shape[2]
            if right != left:
                raise DimensionError(f"MPO bond {x}->{(x + 1) % n}: {right} != {left}")

    @property
    def L(self):
        return len(self.sites)

    @property
    def d(self):
        return self.sites[0].shape[0]

    @property
    def bond_dims(self):
        return [w.shape[2] for w in self.sites]


def _operator_matrix(entries, d, rows, cols):
    """Pack ``{(i, j): d x d operator}`` into a (d, d, rows, cols) site tensor."""
    w = np.zeros((d, d, rows, cols))
    for (i, j), op in entries.items():
        w[:, :, i, j] = op
    return w


def build_hamiltonian_mpo(spec):
    """Hamiltonian MPO with bond dimension 3.

    Bulk sites carry the lower-triangular ``[[1,0,0],[-phi,0,0],[h,phi,1]]``.
    For PBC site 1 is the boundary matrix ``[[0,phi,1],[0,0,-phi],[0,0,h]]``
    which closes the trace and supplies the bond ``-phi_L phi_1``; TPBC flips
    the sign of that closing bond only. OBC uses cap vectors on both ends.
    """
    spec = validate(spec, warn=False)
    d, L = spec.d, spec.L
    phi = local_operator("phi", d)
    one = np.eye(d)
    h = spec_onsite(spec)
    bulk = _operator_matrix({(0, 0): one, (1, 0): -phi, (2, 0): h, (2, 1): phi, (2, 2): one}, d, 3, 3)
    if spec.boundary == "OBC":
        first = _operator_matrix({(0, 0): h, (0, 1): phi, (0, 2): one}, d, 1, 3)
        last = _operator_matrix({(0, 0): one, (1, 0): -phi, (2, 0): h}, d, 3, 1)
        sites = [first] + [bulk.copy() for _ in range(L - 2)] + [last]
        return MPO(tuple(sites), "OBC")
    twist = 1.0 if spec.boundary == "TPBC" else -1.0
    first = _operator_matrix({(0, 1): phi, (0, 2): one, (1, 2): twist * phi, (2, 2): h}, d, 3, 3)
    sites = [first] + [bulk.copy() for _ in range(L - 1)]
    return MPO(tuple(sites), spec.boundary)


def build_product_mpo(ops, spec):
    """Bond-dimension-1 MPO of a tensor product of single-site operators.

    ``ops`` maps 0-based site index to a ``d x d`` matrix; other sites get
    the identity.
    """
    d, L = spec.d, spec.L
    for x in ops:
        if not 0 <= x < L:
            raise ValueError(f"site {x} out of range for L={L}")
    sites = []
    for x in range(L):
        op = np.asarray(ops.get(x, np.eye(d)), dtype=float)
        if op.shape != (d, d):
            raise DimensionError(f"operator at site {x} has shape {op.shape}, expected {(d, d)}")
        sites.append(op.reshape(d, d, 1, 1))
    return MPO(tuple(sites), spec.boundary)


def identity_mpo(spec):
    return build_product_mpo({}, spec)


def mpo_to_dense(mpo, spec=None, cap=DENSE_CAP):
    """Full ``d^L x d^L`` matrix of an MPO (trace over the closing bond)."""
    d, L = mpo.d, mpo.L
    if d ** L > cap:
        raise SizeError(f"d^L = {d ** L} exceeds the dense cap {cap}")
    w0 = mpo.sites[0]
    # acc[n, m, a0, a]: rows/cols grow as sites are appended
    acc = w0
    for w in mpo.sites[1:]:
        acc = np.einsum("nmab,pqbc->npmqac", acc, w)
        s = acc.shape
        acc = acc.reshape(s[0] * s[1], s[2] * s[3], s[4], s[5])
    return np.trace(acc, axis1=2, axis2=3)
