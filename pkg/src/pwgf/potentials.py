"""Trapping potentials with analytic gradients and the exact 1D ground state."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

POTENTIAL_IDS = ("cos1d", "lattice2d", "traplattice3d")


@dataclass(frozen=True)
class Potential:
    """``V`` and ``grad V`` on points of shape ``(P, d)``.

    The built-in ids are ``cos1d`` (``beta cos^2(pi(x+1)/2)``),
    ``lattice2d`` (``2 sin^2(pi x1/4) sin^2(pi x2/4)``) and
    ``traplattice3d`` (``|x|^2 + 100 sum_k sin^2(pi x_k/4)``).  Anything else
    can be plugged in through :meth:`custom`.
    """

    id: str
    beta: float
    L: float
    d: int
    fn: Callable | None = None

    @classmethod
    def custom(cls, fn: Callable, beta: float, L: float, d: int, id: str = "custom"):
        """``fn(x) -> (V, gradV)`` with ``x`` of shape ``(P, d)``."""
        return cls(id, float(beta), float(L), int(d), fn)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.d == 1 else x[None, :]
        if self.fn is not None:
            V, gV = self.fn(x)
            if gV is None:
                raise ValueError(f"potential {self.id!r} must supply its gradient")
            return np.asarray(V, dtype=float), np.asarray(gV, dtype=float)
        if self.id == "cos1d":
            # cos^2(pi(x+1)/2) == sin^2(pi x/2); the sine form is exactly even in x
            s = np.sin(0.5 * np.pi * x[:, 0])
            c = np.cos(0.5 * np.pi * x[:, 0])
            return self.beta * s * s, (self.beta * np.pi * s * c)[:, None]
        if self.id == "lattice2d":
            s = np.sin(0.25 * np.pi * x)
            c = np.cos(0.25 * np.pi * x)
            s2 = s * s
            V = 2.0 * s2[:, 0] * s2[:, 1]
            dsq = 0.5 * np.pi * s * c          # d/dx sin^2(pi x/4)
            g = np.stack([2.0 * dsq[:, 0] * s2[:, 1], 2.0 * s2[:, 0] * dsq[:, 1]], axis=1)
            return V, g
        if self.id == "traplattice3d":
            s = np.sin(0.25 * np.pi * x)
            c = np.cos(0.25 * np.pi * x)
            V = np.sum(x * x, axis=1) + 100.0 * np.sum(s * s, axis=1)
            return V, 2.0 * x + 50.0 * np.pi * s * c
        raise ValueError(f"unknown potential id {self.id!r}")

    def value(self, x):
        return self(x)[0]

    def on_grid(self, axes):
        """Nodal values on the tensor grid spanned by the 1D coordinate arrays ``axes``."""
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return self.value(pts).reshape(mesh[0].shape)


def make_potential(pid: str, beta: float | None = None) -> Potential:
    """Built-in potential by id with its experiment's ``beta``, ``L`` and ``d``."""
    table = {"cos1d": (10.0, 1.0, 1), "lattice2d": (10.0, 16.0, 2),
             "traplattice3d": (1600.0, 8.0, 3)}
    if pid not in table:
        raise ValueError(f"unknown potential id {pid!r}; choose from {POTENTIAL_IDS}")
    b, L, d = table[pid]
    return Potential(pid, b if beta is None else float(beta), L, d)


def exact_1d(x, beta: float = 10.0):
    """Exact ground state of the 1D test: ``(u*(x), lambda*, E*)``."""
    u = np.sin(0.5 * np.pi * (np.asarray(x, dtype=float) + 1.0))
    lam = np.pi ** 2 / 4.0 + beta
    return u, lam, lam / 2.0 - 3.0 * beta / 16.0
