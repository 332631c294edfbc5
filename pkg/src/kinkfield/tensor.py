"""Dense real tensor algebra: contraction, truncated SVD and eigensolvers.

Tensors are plain row-major ``numpy.ndarray`` objects of dtype float64.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ConditioningError, ConvergenceError, DimensionError, NumericError


@dataclass(frozen=True)
class EigResult:
    """Lowest eigenpairs; ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    converged: bool


def contract(a, b, pairs):
    """Sum over paired indices of ``a`` and ``b``.

    The result carries the free indices of ``a`` followed by those of ``b``,
    each group in its original order. An empty ``pairs`` gives the outer
    product.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ia = [p[0] for p in pairs]
    ib = [p[1] for p in pairs]
    if len(set(ia)) != len(ia) or len(set(ib)) != len(ib):
        raise ValueError(f"duplicate index in contraction pairs {pairs}")
    for i, j in pairs:
        if not (0 <= i < a.ndim and 0 <= j < b.ndim):
            raise ValueError(f"index pair {(i, j)} out of range for ranks {a.ndim}, {b.ndim}")
        if a.shape[i] != b.shape[j]:
            raise DimensionError(
                f"extent mismatch on pair {(i, j)}: {a.shape[i]} != {b.shape[j]}")
    free_a = [i for i in range(a.ndim) if i not in ia]
    free_b = [j for j in range(b.ndim) if j not in ib]
    k = int(np.prod([a.shape[i] for i in ia], dtype=np.int64))
    left = a.transpose(free_a + ia).reshape(-1, k)
    right = b.transpose(ib + free_b).reshape(k, -1)
    shape = tuple(a.shape[i] for i in free_a) + tuple(b.shape[j] for j in free_b)
    return (left @ right).reshape(shape)


def factorize_svd(a, split, max_rank=None, cutoff=0.0):
    """Truncated SVD of ``a`` viewed as a matrix (first ``split`` indices are rows).

    Returns ``(U, S, V, discarded_weight)`` where ``U`` has shape
    ``a.shape[:split] + (k,)`` and ``V`` has shape ``(k,) + a.shape[split:]``.
    Singular values below ``cutoff * S.max()`` are dropped, then at most
    ``max_rank`` are kept. ``discarded_weight`` is the sum of the squared
    dropped singular values.
    """
    a = np.asarray(a, dtype=float)
    if not 0 < split < a.ndim:
        raise ValueError(f"split point {split} must leave two nonempty index groups")
    if max_rank is not None and max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite entries in tensor to factorize")
    rows, cols = a.shape[:split], a.shape[split:]
    mat = a.reshape(int(np.prod(rows)), int(np.prod(cols)))
    u, s, vt = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesdd")
    keep = len(s)
    if cutoff > 0 and len(s) and s[0] > 0:
        keep = int(np.count_nonzero(s >= cutoff * s[0]))
    if max_rank is not None:
        keep = min(keep, max_rank)
    keep = max(keep, 1)
    discarded = float(np.sum(s[keep:] ** 2))
    return (u[:, :keep].reshape(rows + (keep,)), s[:keep],
            vt[:keep].reshape((keep,) + cols), discarded)


def _as_matvec(h, dim):
    if callable(h):
        if dim is None:
            raise ValueError("dim is required when h is given as a function")
        return h, dim
    h = np.asarray(h, dtype=float)
    return (lambda v: h @ v), h.shape[0]


def lanczos_lowest(matvec, dim, k=1, tol=1e-10, v0=None, max_iter=None, krylov=40, seed=0):
    """Lowest ``k`` eigenpairs of a symmetric operator given only by ``matvec``.

    Restarted Lanczos with full reorthogonalisation. Converged vectors are
    locked and later pairs are searched in their orthogonal complement.
    Returns ``(values, vectors, converged)``.
    """
    max_iter = 10 * dim if max_iter is None else max_iter
    rng = np.random.default_rng(seed)
    locked = np.zeros((0, dim))
    values = []
    used = 0
    converged = True

    def project(w):
        for _ in range(2):
            if locked.shape[0]:
                w = w - locked.T @ (locked @ w)
        return w

    for j in range(k):
        if j == 0 and v0 is not None:
            v = np.asarray(v0, dtype=float).ravel().copy()
        else:
            v = rng.standard_normal(dim)
        v = project(v)
        if np.linalg.norm(v) < 1e-14:
            v = project(rng.standard_normal(dim))
        v /= np.linalg.norm(v)
        theta = np.nan
        done = False
        while not done:
            m = min(krylov, dim - locked.shape[0])
            basis = np.zeros((m + 1, dim))
            alpha = np.zeros(m)
            beta = np.zeros(m)
            basis[0] = v
            size = m
            for i in range(m):
                w = matvec(basis[i])
                used += 1
                alpha[i] = basis[i] @ w
                for _ in range(2):
                    w = w - basis[:i + 1].T @ (basis[:i + 1] @ w)
                    w = project(w)
                beta[i] = np.linalg.norm(w)
                if beta[i] <= 1e-13 * max(1.0, abs(alpha[i])):
                    size = i + 1
                    break
                basis[i + 1] = w / beta[i]
            if size == 1:
                theta_all, s = alpha[:1], np.ones((1, 1))
            else:
                theta_all, s = scipy.linalg.eigh_tridiagonal(alpha[:size], beta[:size - 1])
            theta = theta_all[0]
            y = basis[:size].T @ s[:, 0]
            y /= np.linalg.norm(y)
            resid = np.linalg.norm(matvec(y) - theta * y)
            used += 1
            if resid <= tol * max(1.0, abs(theta)):
                done = True
            elif used >= max_iter:
                converged = False
                done = True
            else:
                v = project(y)
                v /= np.linalg.norm(v)
        values.append(theta)
        locked = np.vstack([locked, y[None, :]])
    order = np.argsort(values)
    return np.asarray(values)[order], locked.T[:, order], converged


def eig_lowest(h, n=None, k=1, mode="dense", tol=1e-10, dim=None, v0=None):
    """Lowest ``k`` eigenpairs of ``h v = lam n v`` (``n`` = identity when None).

    ``mode="dense"`` uses LAPACK; ``mode="iterative"`` uses only products
    with ``h`` (which may then be a function). Eigenvectors are normalised
    under the metric ``n``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    chol = None
    if n is not None:
        n = np.asarray(n, dtype=float)
        evals = np.linalg.eigvalsh(0.5 * (n + n.T))
        scale = max(abs(evals).max(), 1e-300)
        if evals.min() <= 1e-12 * scale:
            raise ConditioningError(
                f"metric is singular to working precision (min eigenvalue {evals.min():.3e}, "
                f"max {evals.max():.3e}); regularise it first")
        chol = np.linalg.cholesky(0.5 * (n + n.T))

    if mode == "dense":
        if callable(h):
            raise ValueError("dense mode needs an explicit matrix")
        h = np.asarray(h, dtype=float)
        hs = 0.5 * (h + h.T)
        if n is None:
            w, v = scipy.linalg.eigh(hs, subset_by_index=[0, k - 1])
        else:
            w, v = scipy.linalg.eigh(hs, 0.5 * (n + n.T), subset_by_index=[0, k - 1])
        return EigResult(w, v, True)
    if mode != "iterative":
        raise ValueError(f"unknown eigensolver mode {mode!r}")

    matvec, dim = _as_matvec(h, dim)
    if chol is None:
        w, v, ok = lanczos_lowest(matvec, dim, k=k, tol=tol, v0=v0)
        return EigResult(w, v, ok)

    def reduced(y):
        x = scipy.linalg.solve_triangular(chol, y, lower=True, trans="T")
        return scipy.linalg.solve_triangular(chol, matvec(x), lower=True)

    y0 = None if v0 is None else chol.T @ np.asarray(v0, dtype=float)
    w, y, ok = lanczos_lowest(reduced, dim, k=k, tol=tol, v0=y0)
    v = scipy.linalg.solve_triangular(chol, y, lower=True, trans="T")
    return EigResult(w, v, ok)


def dominant_eigenpair(apply, dim, tol=1e-12, apply_left=None, v0=None, w0=None, max_iter=None):
    """Dominant (largest magnitude) eigenvalue with its right and left eigenvectors.

    ``apply`` maps a right vector ``x -> M x``; ``apply_left`` maps
    ``y -> M^T y``. Without ``apply_left`` the matrix is materialised from
    ``apply`` and solved densely. Vectors are scaled so ``left @ right = 1``.
    """
    dense_limit = 400
    if apply_left is None or dim <= dense_limit:
        mat = np.column_stack([apply(e) for e in np.eye(dim)]) if dim else np.zeros((0, 0))
        vals, vecs = np.linalg.eig(mat)
        i = int(np.argmax(np.abs(vals)))
        lvals, lvecs = np.linalg.eig(mat.T)
        j = int(np.argmin(np.abs(lvals - vals[i])))
        value, right, left = vals[i], vecs[:, i], lvecs[:, j]
    else:
        maxiter = max_iter if max_iter is not None else max(1000, 20 * dim)
        op_r = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=apply, dtype=float)
        op_l = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=apply_left, dtype=float)
        try:
            vr, xr = scipy.sparse.linalg.eigs(op_r, k=1, which="LM", tol=tol, v0=v0, maxiter=maxiter)
            vl, xl = scipy.sparse.linalg.eigs(op_l, k=1, which="LM", tol=tol, v0=w0, maxiter=maxiter)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise ConvergenceError(f"dominant eigenpair did not converge: {exc}") from exc
        value, right, left = vr[0], xr[:, 0], xl[:, 0]
    right = _realify(right)
    left = _realify(left)
    right /= right[np.argmax(np.abs(right))] / abs(right[np.argmax(np.abs(right))])
    overlap = left @ right
    if abs(overlap) < 1e-300:
        raise ConvergenceError("left and right dominant vectors are orthogonal")
    left = left / overlap
    return float(np.real(value)), left, right


def _realify(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        k = np.argmax(np.abs(v))
        v = v * (abs(v[k]) / v[k])
        v = np.real(v)
    return np.array(v, dtype=float)
