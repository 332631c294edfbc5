"""Lattice phi^4 model definition and truncated oscillator-basis operators."""
import math
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import TruncationWarning, ValidationError

BOUNDARIES = ("OBC", "PBC", "TPBC")
KINDS = ("a", "a_dag", "number", "phi", "phi_sq", "phi_4", "pi_sq", "h_onsite", "identity")


@dataclass(frozen=True)
class ModelSpec:
    """Couplings are in lattice units (lattice spacing fixed to one).

    ``d`` is the local oscillator truncation (highest occupation ``d - 1``).
    TPBC selects the one-kink sector, PBC and OBC the vacuum sector.
    """

    mu0_sq: float
    lambda0: float
    L: int
    d: int
    boundary: str = "PBC"

    @property
    def charge(self):
        return 1 if self.boundary == "TPBC" else 0

    @property
    def periodic(self):
        return self.boundary in ("PBC", "TPBC")

    @property
    def g0(self):
        return self.lambda0 / self.mu0_sq if self.mu0_sq != 0 else math.inf

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {k: data[k] for k in ("mu0_sq", "lambda0", "L", "d", "boundary") if k in data}
        return cls(**known)


def classical_vev(mu_sq, lambda0):
    """Classical vacuum magnitude sqrt(-6 mu^2 / lambda); 0 in the symmetric phase."""
    if mu_sq >= 0 or lambda0 <= 0:
        return 0.0
    return math.sqrt(-6.0 * mu_sq / lambda0)


def required_dimension(vev):
    """Rough local dimension needed to hold a coherent state centred at ``vev``.

    A coherent state with <phi> = v has mean occupation v^2/2 and Poisson
    width sqrt(v^2/2); four widths above the mean are kept.
    """
    occ = 0.5 * vev * vev
    return int(math.ceil(occ + 4.0 * math.sqrt(occ) + 1.0))


def validate(spec, warn=True):
    """Check ranges and normalise field types. Warns when ``d`` looks too small."""
    try:
        mu0_sq = float(spec.mu0_sq)
        lambda0 = float(spec.lambda0)
        L = int(spec.L)
        d = int(spec.d)
        boundary = str(spec.boundary).upper()
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed model spec: {exc}") from exc
    problems = []
    if d < 2:
        problems.append(f"d must be >= 2 (got {d})")
    if L < 2:
        problems.append(f"L must be >= 2 (got {L})")
    if lambda0 < 0:
        problems.append(f"lambda0 must be >= 0 (got {lambda0})")
    if not (math.isfinite(mu0_sq) and math.isfinite(lambda0)):
        problems.append("couplings must be finite")
    if boundary not in BOUNDARIES:
        problems.append(f"boundary must be one of {BOUNDARIES} (got {spec.boundary!r})")
    if problems:
        raise ValidationError("; ".join(problems))
    vev = classical_vev(mu0_sq, lambda0)
    if warn and vev > 0 and d < required_dimension(vev):
        warnings.warn(
            f"classical vev {vev:.3g} needs d >= {required_dimension(vev)} "
            f"but d = {d}; the field expectation will be truncated",
            TruncationWarning, stacklevel=2)
    return ModelSpec(mu0_sq, lambda0, L, d, boundary)


def _ladder(d):
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)


def _sym(m):
    return 0.5 * (m + m.T)


def local_operator(kind, d, mu0_sq=None, lambda0=None):
    """Truncated ``d x d`` matrix of a single-site operator.

    Composites are products of the truncated primitives. ``h_onsite`` needs
    the couplings: 1/2 pi^2 + (2 + mu0^2)/2 phi^2 + lambda0/4! phi^4.
    """
    if d < 2:
        raise ValidationError(f"d must be >= 2 (got {d})")
    a = _ladder(d)
    phi = (a + a.T) / math.sqrt(2.0)
    if kind == "a":
        return a
    if kind == "a_dag":
        return a.T.copy()
    if kind == "number":
        return np.diag(np.arange(d, dtype=float))
    if kind == "identity":
        return np.eye(d)
    if kind == "phi":
        return phi
    if kind == "phi_sq":
        return _sym(phi @ phi)
    if kind == "phi_4":
        p2 = phi @ phi
        return _sym(p2 @ p2)
    if kind == "pi_sq":
        diff = a.T - a
        return _sym(-0.5 * diff @ diff)
    if kind == "h_onsite":
        if mu0_sq is None or lambda0 is None:
            raise ValueError("h_onsite needs mu0_sq and lambda0")
        return onsite_hamiltonian(d, mu0_sq, lambda0)
    raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")


def onsite_hamiltonian(d, mu0_sq, lambda0):
    pi_sq = local_operator("pi_sq", d)
    phi_sq = local_operator("phi_sq", d)
    phi_4 = local_operator("phi_4", d)
    return _sym(0.5 * pi_sq + 0.5 * (2.0 + mu0_sq) * phi_sq + lambda0 / 24.0 * phi_4)


def spec_onsite(spec):
    return onsite_hamiltonian(spec.d, spec.mu0_sq, spec.lambda0)


def parity(d):
    """Diagonal (-1)^n, the truncated image of phi -> -phi."""
    return np.diag((-1.0) ** np.arange(d))
