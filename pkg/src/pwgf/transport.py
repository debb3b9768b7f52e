"""Boundary-preserving Neural ODE transport maps on ``(-L, L)^d``.

Each coordinate is moved by its own scalar ODE ``w' = (1 - w^2/L^2) g(w)``
integrated with forward Euler on pseudo-time ``[0, 1]``.  Alongside the
position we carry ``l = log T'``, ``J = exp(l)`` and ``l' = d l / dz`` so
that densities and scores of the pushed measure are available at the
particles without numerical differentiation.

Parameter derivatives differentiate the discrete Euler recursion itself,
so the metric and the energy gradient refer to exactly the map that is
evaluated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .net import NetworkParams, n_params, net_backprop, net_eval
from .reference import ParticleSet


class TransportError(RuntimeError):
    pass


@dataclass
class TransportMap:
    """Product map with one width-``H`` network per axis.

    ``theta`` is the concatenation of the ``d`` flat per-axis blocks.
    """

    d: int
    H: int
    L: float
    n_ode: int = 10
    theta: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.theta is None:
            self.theta = np.zeros(self.M)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.M,):
            raise ValueError(f"theta must have length {self.M}, got {self.theta.shape}")
        if self.n_ode < 1:
            raise ValueError("n_ode must be >= 1")

    @property
    def M1(self) -> int:
        return n_params(self.H)

    @property
    def M(self) -> int:
        return self.d * self.M1

    def block(self, k: int) -> slice:
        return slice(k * self.M1, (k + 1) * self.M1)

    def axis_params(self, k: int) -> NetworkParams:
        return NetworkParams.from_flat(self.theta[self.block(k)], self.H)

    def with_theta(self, theta) -> "TransportMap":
        return TransportMap(self.d, self.H, self.L, self.n_ode, np.array(theta, dtype=float))

    @classmethod
    def initial(cls, d, H, L, n_ode, rng, scale=0.01, identical_axes=True):
        """Small random weights, zero biases."""
        first = NetworkParams.random(H, rng, scale).flatten()
        blocks = [first if identical_axes or k == 0
                  else NetworkParams.random(H, rng, scale).flatten() for k in range(d)]
        return cls(d, H, L, n_ode, np.concatenate(blocks))

    def __call__(self, z):
        """Push points ``z`` (shape ``(P, d)`` or ``(P,)`` for d = 1) through the map."""
        z = _as_points(z, self.d)
        return np.stack([_forward_axis(self.axis_params(k), self.L, self.n_ode, z[:, k],
                                       keep=False, check=False)[0][0]
                         for k in range(self.d)], axis=1)


@dataclass
class AugmentedState:
    w: np.ndarray      # (P, d) pushed positions
    ell: np.ndarray    # (P, d) log T'
    J: np.ndarray      # (P, d) T'
    dell: np.ndarray   # (P, d) d(log T')/dz
    tape: list | None = None


def _as_points(z, d):
    if isinstance(z, ParticleSet):
        z = z.z
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None] if d == 1 else z[None, :]
    if z.shape[1] != d:
        raise ValueError(f"points have {z.shape[1]} coordinates, map has d={d}")
    return z


def velocity(params: NetworkParams, L: float, w):
    """``(f, f', f'')`` of ``f(w) = (1 - w^2/L^2) g(w)``."""
    ev = net_eval(params, w)
    return _velocity_from(ev, np.asarray(w, dtype=float), L)[:3]


def _velocity_from(ev, w, L):
    L2 = L * L
    s0 = 1.0 - w * w / L2
    s1 = -2.0 * w / L2
    s2 = -2.0 / L2
    f0 = s0 * ev.g
    f1 = s1 * ev.g + s0 * ev.dg
    f2 = s2 * ev.g + 2.0 * s1 * ev.dg + s0 * ev.d2g
    return f0, f1, f2, s0, s1, s2


def _forward_axis(params, L, n_ode, z, keep=True, check=True):
    dt = 1.0 / n_ode
    w = np.array(z, dtype=float)
    P = w.shape[0]
    ell = np.zeros(P)
    J = np.ones(P)
    dell = np.zeros(P)
    steps = [] if keep else None
    # blow-ups are detected below (or by the caller), not warned about
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_ode):
            ev = net_eval(params, w)
            f0, f1, f2, s0, s1, s2 = _velocity_from(ev, w, L)
            w_old = w
            w = w + dt * f0
            ell = ell + dt * f1
            J = np.exp(ell)
            dell = dell + dt * f2 * J
            if keep:
                steps.append(dict(w=w_old, ev=ev, s=(s0, s1, s2), f2=f2, J=J))
    if check:
        bad = ~(np.isfinite(w) & np.isfinite(ell) & np.isfinite(dell)) \
            | ((np.abs(w) >= L) & (np.abs(z) < L)) | (np.abs(w) > L)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise TransportError(
                f"augmented integration failed at particle {i}: "
                f"z={z[i]!r}, w={w[i]!r}, log J={ell[i]!r}")
    return (w, ell, J, dell), steps


def integrate_augmented(tmap: TransportMap, particles, keep_tape: bool = False) -> AugmentedState:
    """Run the augmented Euler scheme for every particle and axis."""
    z = _as_points(particles, tmap.d)
    outs, tapes = [], []
    for k in range(tmap.d):
        state, steps = _forward_axis(tmap.axis_params(k), tmap.L, tmap.n_ode, z[:, k],
                                     keep=keep_tape)
        outs.append(state)
        tapes.append(steps)
    w, ell, J, dell = (np.stack([o[i] for o in outs], axis=1) for i in range(4))
    return AugmentedState(w, ell, J, dell, tapes if keep_tape else None)


def density_at_particles(particles: ParticleSet, aug: AugmentedState) -> np.ndarray:
    """``rho(x_i) = mu(z_i) / prod_k T_k'(z_k,i)``."""
    return np.exp(particles.log_mu - aug.ell.sum(axis=1))


def score_at_particles(particles: ParticleSet, aug: AugmentedState) -> np.ndarray:
    """Per-axis score of the pushed density at ``x_i``."""
    if np.any(aug.J <= 0):
        i = int(np.flatnonzero((aug.J <= 0).any(axis=1))[0])
        raise TransportError(f"map is not orientation preserving at particle {i}")
    return (particles.score_axis - aug.dell) / aug.J


def reverse_axis(params: NetworkParams, L: float, n_ode: int, steps, aw, aell, adell,
                 groups: int | None = None):
    """Parameter gradients of ``aw.w + aell.l + adell.l'`` at ``tau = 1``.

    Walks the Euler recursion backwards using the taped forward states.
    Returns per-sample rows ``(P, M1)``, or ``(groups, M1)`` sums over
    contiguous sample groups.
    """
    dt = 1.0 / n_ode
    P = steps[0]["w"].shape[0]
    aw = np.broadcast_to(np.asarray(aw, dtype=float), (P,)).copy()
    aell = np.broadcast_to(np.asarray(aell, dtype=float), (P,)).copy()
    adell = np.broadcast_to(np.asarray(adell, dtype=float), (P,))
    L2 = L * L
    grad = np.zeros((P if groups is None else groups, n_params(params.H)))
    position_only = not np.any(aell) and not np.any(adell)
    for st in reversed(steps):
        w, ev = st["w"], st["ev"]
        s0, s1, s2 = st["s"]
        af0 = dt * aw
        if position_only:
            g_theta, aw_net = net_backprop(ev.tape, (s0 * af0, None, None), params,
                                           return_input=True, groups=groups)
            grad += g_theta
            aw = aw + aw_net - (2.0 * w / L2) * af0 * ev.g
            continue
        J = st["J"]
        # l'_{n+1} = l'_n + dt f''(w_n) exp(l_{n+1})
        af2 = dt * J * adell
        aell = aell + dt * st["f2"] * J * adell
        # l_{n+1} = l_n + dt f'(w_n);  w_{n+1} = w_n + dt f(w_n)
        af1 = dt * aell
        ag0 = s0 * af0 + s1 * af1 + s2 * af2
        ag1 = s0 * af1 + 2.0 * s1 * af2
        ag2 = s0 * af2
        as0 = af0 * ev.g + af1 * ev.dg + af2 * ev.d2g
        as1 = af1 * ev.g + 2.0 * af2 * ev.dg
        g_theta, aw_net = net_backprop(ev.tape, (ag0, ag1, ag2), params,
                                       return_input=True, groups=groups)
        grad += g_theta
        aw = aw + aw_net - (2.0 * w / L2) * as0 - (2.0 / L2) * as1
    return grad


def axis_jacobians(tmap: TransportMap, particles, aug: AugmentedState | None = None):
    """``d T_k(z_k) / d theta_k`` per axis, each of shape ``(P, M1)``."""
    if aug is None or aug.tape is None:
        aug = integrate_augmented(tmap, particles, keep_tape=True)
    return [reverse_axis(tmap.axis_params(k), tmap.L, tmap.n_ode, aug.tape[k], 1.0, 0.0, 0.0)
            for k in range(tmap.d)]


def parameter_jacobian(tmap: TransportMap, particles, aug: AugmentedState | None = None):
    """Full per-sample Jacobians ``d T / d theta`` of shape ``(P, d, M)``.

    Cross-axis blocks are exactly zero under the product map.
    """
    blocks = axis_jacobians(tmap, particles, aug)
    P = blocks[0].shape[0]
    out = np.zeros((P, tmap.d, tmap.M))
    for k, b in enumerate(blocks):
        out[:, k, tmap.block(k)] = b
    return out
