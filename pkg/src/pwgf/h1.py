"""Finite-difference H1 Sobolev gradient flow for the discrete GP energy.

Discretisation: ``n`` interior nodes per axis on ``(-L, L)^d`` with
``h = 2L/(n+1)`` and zero Dirichlet values.  The inner product is
``<u, v> = h^d sum u v``; the gradient energy uses forward differences on
all cell edges, boundary edges included, so its first variation is the
standard (2d+1)-point Laplacian.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dstn, idstn

from .metric import conjugate_gradient
from .reconstruct import GridFunction, fd_grid


class FdError(RuntimeError):
    pass


@dataclass
class FdProblem:
    d: int
    n: int
    L: float
    V: np.ndarray      # interior nodal values, shape (n,)*d
    beta: float

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n + 1)

    @property
    def axis(self) -> np.ndarray:
        return fd_grid(self.n, self.L)[1:-1]

    @classmethod
    def from_potential(cls, potential, n: int, L: float | None = None) -> "FdProblem":
        L = potential.L if L is None else L
        x = fd_grid(n, L)[1:-1]
        V = potential.on_grid([x] * potential.d)
        if np.any(V < 0):
            raise FdError("potential must be non-negative on the grid")
        return cls(potential.d, n, float(L), V, float(potential.beta))

    def inner(self, u, v) -> float:
        return float(self.h ** self.d * np.vdot(u, v))

    def norm(self, u) -> float:
        return np.sqrt(self.inner(u, u))

    def normalize(self, u):
        return u / self.norm(u)

    def laplacian(self, u):
        """``-Delta_h u`` with zero Dirichlet data."""
        out = 2.0 * self.d * u
        for ax in range(self.d):
            lo = [slice(None)] * self.d
            hi = [slice(None)] * self.d
            lo[ax], hi[ax] = slice(None, -1), slice(1, None)
            out[tuple(hi)] -= u[tuple(lo)]
            out[tuple(lo)] -= u[tuple(hi)]
        return out / self.h ** 2

    @property
    def _dst_symbol(self):
        j = np.arange(1, self.n + 1)
        lam1 = (4.0 / self.h ** 2) * np.sin(j * np.pi / (2 * (self.n + 1))) ** 2
        grids = np.meshgrid(*([lam1] * self.d), indexing="ij", sparse=True)
        return sum(grids)

    def solve_shifted(self, r, method: str = "dst", tol: float = 1e-10, maxiter: int = 500):
        """Solve ``(-Delta_h + I) y = r``.

        ``dst`` diagonalises the Dirichlet Laplacian with type-I sine
        transforms; ``cg`` is unpreconditioned conjugate gradients.
        """
        if method == "dst":
            return idstn(dstn(r, type=1) / (self._dst_symbol + 1.0), type=1)
        if method == "cg":
            b = r.ravel()
            shape = r.shape
            bn = float(np.linalg.norm(b))
            if bn == 0.0:
                return np.zeros_like(r)

            def A(v):
                v = v.reshape(shape)
                return (self.laplacian(v) + v).ravel()
            x = np.zeros_like(b)
            res = None
            for _ in range(max(1, maxiter // 50)):
                out = conjugate_gradient(A, b - A(x), 50)
                x = x + out.x
                res = float(np.linalg.norm(b - A(x))) / bn
                if res <= tol:
                    return x.reshape(shape)
            raise FdError(f"inner CG did not converge: relative residual {res:.3e}")
        raise ValueError(f"unknown solver {method!r}")


def _interior(u, prob: FdProblem):
    if isinstance(u, GridFunction):
        if u.n != prob.n + 2:
            raise FdError(f"grid has {u.n} nodes per axis, problem expects {prob.n + 2}")
        return np.array(u.interior)
    u = np.asarray(u, dtype=float)
    if u.shape != (prob.n,) * prob.d:
        raise FdError(f"expected interior array of shape {(prob.n,) * prob.d}, got {u.shape}")
    return u


def to_grid(u, prob: FdProblem) -> GridFunction:
    v = np.zeros((prob.n + 2,) * prob.d)
    v[(slice(1, -1),) * prob.d] = u
    return GridFunction(v, prob.L)


def fd_energy(u, prob: FdProblem, check_norm: bool = True):
    """Discrete energy and eigenvalue ``(E_h, lambda_h)`` of a normalised ``u``."""
    u = _interior(u, prob)
    if check_norm and abs(prob.norm(u) - 1.0) > 1e-8:
        raise FdError(f"u must be L2-normalised (norm = {prob.norm(u):.12g})")
    hd = prob.h ** prob.d
    # forward differences over all n+1 edges, zero Dirichlet data at both ends
    grad2 = 0.0
    for ax in range(prob.d):
        dif = np.diff(u, axis=ax)
        lo = np.take(u, 0, axis=ax)
        hi = np.take(u, -1, axis=ax)
        grad2 += np.vdot(dif, dif) + np.vdot(lo, lo) + np.vdot(hi, hi)
    grad2 *= hd / prob.h ** 2
    u2 = u * u
    pot = hd * np.vdot(prob.V, u2)
    quart = hd * np.vdot(u2, u2)
    E = 0.5 * grad2 + 0.5 * pot + 0.25 * prob.beta * quart
    lam = grad2 + pot + prob.beta * quart
    return float(E), float(lam)


def _residual(u, prob):
    return prob.laplacian(u) + (prob.V + prob.beta * u * u) * u


def h1_direction(u, prob: FdProblem, solver: str = "dst"):
    """Sobolev gradient of the energy on the unit sphere at ``u``."""
    r = _residual(u, prob)
    y = prob.solve_shifted(r, solver)
    v = prob.solve_shifted(u, solver)
    # H1-orthogonal projection onto the tangent space {t : <u, t> = 0}
    return y - (prob.inner(u, y) / prob.inner(u, v)) * v


def h1_step(u, prob: FdProblem, tau: float, solver: str = "dst"):
    """One projected H1 gradient step followed by renormalisation."""
    u = _interior(u, prob)
    return prob.normalize(u - tau * h1_direction(u, prob, solver))


@dataclass
class H1Result:
    u: np.ndarray
    E: float
    lam: float
    converged: bool
    history: list = field(default_factory=list)   # (step, E, lambda, residual, tau)

    def steps_to(self, E_ref: float, tol: float) -> int | None:
        for k, E, *_ in self.history:
            if abs(E - E_ref) <= tol:
                return k
        return None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "E", "lambda", "residual", "tau"])
            for row in self.history:
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def h1_solve(u0, prob: FdProblem, tau: float = 0.9, max_steps: int = 2000,
             tol: float = 1e-12, solver: str = "dst", callback=None) -> H1Result:
    """Iterate :func:`h1_step` until the energy change drops below ``tol``.

    A step that raises the energy is retried with half the step size, so the
    accepted energies are non-increasing.
    """
    u = prob.normalize(_interior(u0, prob))
    E, lam = fd_energy(u, prob)

    def resid(u, lam):
        return prob.norm(_residual(u, prob) - lam * u)

    hist = [(0, E, lam, resid(u, lam), 0.0)]
    converged = False
    for k in range(1, max_steps + 1):
        t = tau
        yt = h1_direction(u, prob, solver)
        for _ in range(60):
            un = prob.normalize(u - t * yt)
            En, lamn = fd_energy(un, prob, check_norm=False)
            if En <= E:
                break
            t *= 0.5
        else:
            raise FdError(f"energy increased at step {k} for every step size down to {t:.1e}")
        dE = E - En
        u, E, lam = un, En, lamn
        hist.append((k, E, lam, resid(u, lam), t))
        if callback is not None:
            callback(hist[-1])
        if dE <= tol:
            converged = True
            break
    return H1Result(u, E, lam, converged, hist)


def constant_init(prob: FdProblem) -> np.ndarray:
    return prob.normalize(np.ones((prob.n,) * prob.d))


def random_init(prob: FdProblem, seed: int = 42) -> np.ndarray:
    """``|N(0, 1)|`` nodal values, normalised."""
    rng = np.random.default_rng(seed)
    return prob.normalize(np.abs(rng.standard_normal((prob.n,) * prob.d)))


def laplace_ground_mode(prob: FdProblem) -> np.ndarray:
    """Lowest Dirichlet eigenvector of ``-Delta_h`` (normalised)."""
    s = np.sin(np.pi * (prob.axis + prob.L) / (2.0 * prob.L))
    u = s
    for _ in range(prob.d - 1):
        u = np.multiply.outer(u, s)
    return prob.normalize(u)
