"""Reference densities on (-L, L) and sign-symmetric particle sampling."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import logsumexp

KINDS = ("beta22", "beta55", "gaussmix")

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class DomainError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


def _gauss_legendre_cells(f, edges):
    """Integral of ``f`` over each cell ``[edges[i], edges[i+1]]``."""
    lo, hi = edges[:-1], edges[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return half * (f(x) @ _GL_WEIGHTS)


@dataclass(frozen=True)
class ReferenceDensity:
    """One-dimensional reference density vanishing at ``z = +-L``.

    ``beta22`` is ``3/(4L) (1 - z^2/L^2)``, ``beta55`` is
    ``C1 (1 - z^2/L^2)^4`` with ``C1 = 315/(256 L)`` and ``gaussmix`` is a
    boundary-damped Gaussian mixture normalised by quadrature.
    """

    kind: str
    L: float
    centers: tuple = ()
    sigma: float = 1.0
    table_size: int = 4096

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown reference kind {self.kind!r}")
        if self.L <= 0:
            raise ConfigurationError("L must be positive")
        if self.kind == "gaussmix" and not self.centers:
            raise ConfigurationError("gaussmix needs at least one center")

    @classmethod
    def beta22(cls, L: float = 1.0):
        return cls("beta22", float(L))

    @classmethod
    def beta55(cls, L: float = 8.0):
        return cls("beta55", float(L))

    @classmethod
    def gaussmix(cls, L: float = 16.0, centers=(-12, -8, -4, 0, 4, 8, 12),
                 sigma: float = 1.5):
        return cls("gaussmix", float(L), tuple(float(c) for c in centers),
                   float(sigma))

    # -- density -----------------------------------------------------------

    def _log_unnormalized(self, z):
        # z >= 0 assumed by callers that need bitwise symmetry
        b = np.log1p(-(z / self.L) ** 2)
        if self.kind == "beta22":
            return b
        if self.kind == "beta55":
            return 4.0 * b
        c = np.asarray(self.centers)
        e = -((z[..., None] - c) ** 2) / (2.0 * self.sigma ** 2)
        return b + logsumexp(e, axis=-1)

    @cached_property
    def log_norm(self) -> float:
        """Log of the normalisation constant ``C``."""
        if self.kind == "beta22":
            return float(np.log(3.0 / (4.0 * self.L)))
        if self.kind == "beta55":
            return float(np.log(315.0 / (256.0 * self.L)))
        edges = np.linspace(-self.L, self.L, 2049)
        mass = _gauss_legendre_cells(
            lambda z: np.exp(self._log_unnormalized(z)), edges).sum()
        return float(-np.log(mass))

    def _check(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(np.abs(z) >= self.L) or not np.all(np.isfinite(z)):
            raise DomainError(f"reference {self.kind} evaluated outside (-L, L) "
                              f"with L={self.L}")
        return z

    def log_density(self, z):
        z = self._check(z)
        return self.log_norm + self._log_unnormalized(np.abs(z))

    def pdf(self, z):
        """Density with zeros at and beyond the boundary (no domain check)."""
        z = np.asarray(z, dtype=float)
        inside = np.abs(z) < self.L
        zi = np.where(inside, np.abs(z), 0.0)
        return np.where(inside, np.exp(self.log_norm + self._log_unnormalized(zi)), 0.0)

    def score(self, z):
        """``d/dz log mu``; evaluated on ``|z|`` so that it is exactly odd."""
        z = self._check(z)
        a = np.abs(z)
        L2 = self.L ** 2
        if self.kind == "beta22":
            s = -2.0 * a / (L2 - a * a)
        elif self.kind == "beta55":
            s = -8.0 * a / (L2 - a * a)
        else:
            c = np.asarray(self.centers)
            e = -((a[..., None] - c) ** 2) / (2.0 * self.sigma ** 2)
            wk = np.exp(e - logsumexp(e, axis=-1, keepdims=True))
            s = np.sum(wk * (c - a[..., None]), axis=-1) / self.sigma ** 2 \
                - 2.0 * a / (L2 - a * a)
        return np.copysign(1.0, z) * s

    # -- sampling ----------------------------------------------------------

    @cached_property
    def _inverse_folded_cdf(self):
        edges = np.linspace(0.0, self.L, self.table_size)
        cells = _gauss_legendre_cells(lambda z: 2.0 * self.pdf(z), edges)
        cdf = np.concatenate([[0.0], np.cumsum(cells)])
        cdf /= cdf[-1]
        # the tail flattens to machine precision near L; keep it strictly monotone
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        return PchipInterpolator(cdf[keep], edges[keep])

    def folded_cdf(self, z):
        """CDF of ``|Z|`` on ``[0, L]`` by adaptive quadrature (slow, for tests)."""
        from scipy.integrate import quad
        pts = [c for c in self.centers if 0 < c < self.L] or None
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return np.array([2.0 * quad(self.pdf, 0.0, zi, points=[p for p in (pts or []) if p < zi] or None,
                                    limit=200)[0] for zi in z])

    def sample_positive(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` draws of ``|Z|`` by inverse CDF, all strictly inside ``(0, L)``."""
        inv = self._inverse_folded_cdf
        out = np.empty(0)
        while out.size < n:
            u = rng.random(n - out.size)
            z = inv(u)
            z = z[(z > 0.0) & (z < self.L)]
            out = np.concatenate([out, z])
        return out


def sign_patterns(d: int) -> np.ndarray:
    """All ``2**d`` sign tuples, first coordinate varying slowest."""
    return np.array(list(itertools.product((1.0, -1.0), repeat=d)))


@dataclass
class ParticleSet:
    z: np.ndarray                 # (N, d)
    refs: tuple                   # one ReferenceDensity per axis
    n_base: int | None = None     # set when the set is sign-symmetric
    seed: int | None = None
    log_mu_axis: np.ndarray = field(init=False)
    score_axis: np.ndarray = field(init=False)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.ndim == 1:
            self.z = self.z[:, None]
        if len(self.refs) != self.d:
            raise ConfigurationError("need one reference density per axis")
        self.log_mu_axis = np.stack(
            [r.log_density(self.z[:, k]) for k, r in enumerate(self.refs)], axis=1)
        self.score_axis = np.stack(
            [r.score(self.z[:, k]) for k, r in enumerate(self.refs)], axis=1)

    @property
    def N(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.z.shape[1]

    @property
    def log_mu(self) -> np.ndarray:
        return self.log_mu_axis.sum(axis=1)

    def flipped(self, signs) -> "ParticleSet":
        """The same set with coordinate signs flipped (rows permuted for symmetric sets)."""
        return ParticleSet(self.z * np.asarray(signs, dtype=float), self.refs,
                           self.n_base, self.seed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index"] + [f"z_{k + 1}" for k in range(self.d)])
            for i, row in enumerate(self.z):
                w.writerow([i] + [repr(float(v)) for v in row])


def _as_refs(refs, d):
    if isinstance(refs, ReferenceDensity):
        return (refs,) * d
    refs = tuple(refs)
    if len(refs) != d:
        raise ConfigurationError(f"got {len(refs)} reference densities for d={d}")
    return refs


def sample_sign_symmetric(refs, d: int, N: int, seed: int) -> ParticleSet:
    """Draw ``N / 2**d`` base points in the positive orthant and add every sign mirror.

    Rows are grouped by sign pattern: block ``j`` holds ``sign_patterns(d)[j] * base``.
    """
    m = 2 ** d
    if N <= 0 or N % m:
        raise ConfigurationError(
            f"N={N} must be a positive multiple of 2**d={m} for sign-symmetric sampling")
    refs = _as_refs(refs, d)
    rng = np.random.default_rng(seed)
    nb = N // m
    base = np.stack([r.sample_positive(nb, rng) for r in refs], axis=1)
    z = np.concatenate([s * base for s in sign_patterns(d)], axis=0)
    return ParticleSet(z, refs, n_base=nb, seed=seed)


def sample_iid(refs, d: int, N: int, seed: int) -> ParticleSet:
    """Plain i.i.d. draws (random sign per coordinate); no symmetry structure."""
    refs = _as_refs(refs, d)
    rng = np.random.default_rng(seed)
    cols = []
    for r in refs:
        a = r.sample_positive(N, rng)
        cols.append(np.where(rng.random(N) < 0.5, -a, a))
    return ParticleSet(np.stack(cols, axis=1), refs, n_base=None, seed=seed)
