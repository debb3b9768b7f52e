"""Pullback metric and the regularised natural-gradient solve."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal


class SolverError(ArithmeticError):
    pass


def assemble_metric(jacobians) -> np.ndarray:
    """``G = 1/N sum_i J_i^T J_i`` from per-sample Jacobians of shape ``(N, d, M)``."""
    jac = np.asarray(jacobians, dtype=float)
    if jac.ndim == 2:
        jac = jac[:, None, :]
    if jac.ndim != 3 or jac.shape[0] < 1:
        raise ValueError(f"expected jacobians of shape (N, d, M), got {jac.shape}")
    N, d, M = jac.shape
    A = jac.reshape(N * d, M)
    G = A.T @ A / N
    return 0.5 * (G + G.T)


def assemble_metric_blocks(blocks) -> np.ndarray:
    """Same matrix as :func:`assemble_metric` from per-axis ``(N, M1)`` blocks.

    Only the diagonal blocks are computed; the cross-axis blocks are zero.
    """
    N = blocks[0].shape[0]
    sizes = [b.shape[1] for b in blocks]
    if any(b.shape[0] != N for b in blocks):
        raise ValueError("all blocks need the same number of samples")
    M = sum(sizes)
    G = np.zeros((M, M))
    o = 0
    for b, m in zip(blocks, sizes):
        g = b.T @ b / N
        G[o:o + m, o:o + m] = 0.5 * (g + g.T)
        o += m
    return G


@dataclass
class CGResult:
    x: np.ndarray
    residual: float
    iterations: int
    residuals: list = field(default_factory=list)
    ritz: tuple = (np.nan, np.nan)   # extreme Ritz values of G + eps I


def conjugate_gradient(matvec, b, n_iter: int, x0=None) -> CGResult:
    """Plain CG for a symmetric positive definite operator.

    Runs exactly ``n_iter`` iterations unless the residual vanishes
    (breakdown).  Recursive residual norms are recorded but never used to
    stop early; ``CGResult.residual`` is the true residual ``|b - A x|``.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = float(r @ r)
    history = [np.sqrt(rr)]
    alphas, betas = [], []
    k = 0
    while k < n_iter and rr > 0.0:
        Ap = matvec(p)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp) or pAp <= 0.0:
            if not np.isfinite(pAp):
                raise SolverError(f"non-finite curvature p^T A p at CG iteration {k}")
            break
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(r @ r)
        beta = rr_new / rr
        alphas.append(alpha)
        betas.append(beta)
        p = r + beta * p
        rr = rr_new
        k += 1
        history.append(np.sqrt(rr))
    if not np.all(np.isfinite(x)):
        raise SolverError("CG produced non-finite iterates (catastrophic conditioning)")
    true_res = float(np.linalg.norm(b - matvec(x)))
    return CGResult(x, true_res, k, history, _ritz(alphas, betas))


def _ritz(alphas, betas):
    # Lanczos tridiagonal recovered from the CG coefficients
    if not alphas:
        return (np.nan, np.nan)
    a = np.asarray(alphas)
    bt = np.asarray(betas)
    diag = 1.0 / a
    diag[1:] += bt[:-1] / a[:-1]
    off = np.sqrt(bt[:-1]) / a[:-1]
    ev = eigvalsh_tridiagonal(diag, off)
    return (float(ev[0]), float(ev[-1]))


def natural_direction(G, grad, n_cg: int = 100, eps: float = 1e-6,
                      method: str = "cg") -> CGResult:
    """Approximate solution of ``(G + eps I) xi = grad`` from a zero start.

    ``G`` is either a dense matrix or a callable ``v -> G v`` (matrix-free).
    ``method='minres'`` uses SciPy's MINRES with the same iteration cap.
    """
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise SolverError("gradient contains non-finite entries")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if callable(G):
        def matvec(v):
            return G(v) + eps * v
    else:
        G = np.asarray(G, dtype=float)

        def matvec(v):
            return G @ v + eps * v
    if method == "cg":
        return conjugate_gradient(matvec, grad, n_cg)
    if method == "minres":
        from scipy.sparse.linalg import LinearOperator, minres
        n = grad.shape[0]
        op = LinearOperator((n, n), matvec=matvec, dtype=float)
        # machine-precision tolerance: the iteration cap is the only stop, as for CG
        x, _ = minres(op, grad, rtol=np.finfo(float).eps, maxiter=n_cg)
        res = float(np.linalg.norm(grad - matvec(x)))
        return CGResult(x, res, n_cg, [res])
    raise ValueError(f"unknown method {method!r}")


def metric_matvec(blocks):
    """Matrix-free ``v -> G v`` from per-axis Jacobian blocks."""
    N = blocks[0].shape[0]
    sizes = np.cumsum([0] + [b.shape[1] for b in blocks])

    def apply(v):
        out = np.empty_like(v)
        for k, b in enumerate(blocks):
            sl = slice(sizes[k], sizes[k + 1])
            out[sl] = b.T @ (b @ v[sl]) / N
        return out
    return apply
