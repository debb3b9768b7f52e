"""Grid reconstruction of ``u = sqrt(rho)`` from a trained map, interpolation and file I/O.

Grids are uniform, node-centred and include the boundary nodes of the box
``[-L, L]^d``; boundary values are zero.  The discrete L2 norm is the
nodal sum ``h^d sum u^2`` (identical to the trapezoid rule because the
boundary values vanish).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .transport import TransportMap, _forward_axis


class ReconstructionError(RuntimeError):
    pass


@dataclass
class GridFunction:
    values: np.ndarray   # shape (n,)*d including boundary nodes
    L: float

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.n)

    @property
    def interior(self) -> np.ndarray:
        return self.values[(slice(1, -1),) * self.d]

    def norm(self) -> float:
        return float(np.sqrt(self.h ** self.d * np.sum(self.values ** 2)))

    def normalized(self) -> "GridFunction":
        v = self.values / self.norm()
        _zero_boundary(v)
        return GridFunction(v, self.L)

    def metadata(self) -> dict:
        return dict(d=self.d, n=self.n, h=self.h, L=self.L, domain=[-self.L, self.L],
                    dtype="float64", order="C", includes_boundary=True,
                    norm="nodal: h^d * sum(u^2)")

    def save(self, path) -> tuple[Path, Path]:
        """Write ``<path>.f64`` (raw little-endian doubles) and ``<path>.json``."""
        path = Path(path)
        raw, meta = path.with_suffix(".f64"), path.with_suffix(".json")
        np.ascontiguousarray(self.values, dtype="<f8").tofile(raw)
        meta.write_text(json.dumps(self.metadata(), indent=2))
        return raw, meta

    @classmethod
    def load(cls, path) -> "GridFunction":
        path = Path(path)
        raw, meta = path.with_suffix(".f64"), path.with_suffix(".json")
        if not raw.exists() or not meta.exists():
            raise FileNotFoundError(f"grid file pair {raw} / {meta} not found")
        m = json.loads(meta.read_text())
        v = np.fromfile(raw, dtype="<f8").reshape((m["n"],) * m["d"])
        return cls(v, float(m["L"]))

    def to_csv(self, path) -> None:
        if self.d != 1:
            raise ValueError("CSV export is only for 1D grid functions")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u"])
            for x, u in zip(self.axis, self.values):
                w.writerow([repr(float(x)), repr(float(u))])


def _zero_boundary(v):
    for ax in range(v.ndim):
        idx = [slice(None)] * v.ndim
        idx[ax] = 0
        v[tuple(idx)] = 0.0
        idx[ax] = -1
        v[tuple(idx)] = 0.0


def invert_axis(params, L, n_ode, x, tol=1e-12, max_iter=200):
    """Solve ``T(z) = x`` for interior targets.

    Safeguarded secant iteration on the discrete map, started from the
    augmented Jacobian ``J``.  Steps that leave the bracket fall back to
    false position, then to bisection.
    """
    lo = np.full(x.shape, -L)
    hi = np.full(x.shape, L)
    r_lo, r_hi = lo - x, hi - x          # T(+-L) = +-L
    z = np.array(x, dtype=float)
    z_old = r_old = None
    for _ in range(max_iter):
        w, _, J, _ = _forward_axis(params, L, n_ode, z, keep=False, check=False)[0]
        r = w - x
        below = r < 0
        lo, r_lo = np.where(below, z, lo), np.where(below, r, r_lo)
        hi, r_hi = np.where(below, hi, z), np.where(below, r_hi, r)
        slope = J
        if z_old is not None:
            dz = z - z_old
            ok = dz != 0
            slope = np.where(ok, (r - r_old) / np.where(ok, dz, 1.0), J)
        with np.errstate(divide="ignore", invalid="ignore"):
            zn = z - r / slope
            zf = lo - r_lo * (hi - lo) / (r_hi - r_lo)
        zn = np.where((zn >= lo) & (zn <= hi), zn, zf)
        zn = np.where((zn >= lo) & (zn <= hi), zn, 0.5 * (lo + hi))
        step = np.abs(zn - z)
        z_old, r_old, z = z, r, zn
        if np.max(np.minimum(step, hi - lo)) <= tol:
            break
    return z


def check_monotone(tmap: TransportMap, n: int = 4001) -> None:
    z = np.linspace(-tmap.L, tmap.L, n)
    for k in range(tmap.d):
        x = _forward_axis(tmap.axis_params(k), tmap.L, tmap.n_ode, z, keep=False,
                          check=False)[0][0]
        with np.errstate(invalid="ignore"):
            inc = np.all(np.diff(x) > 0)
        if not inc:
            raise ReconstructionError(f"map for axis {k} is not strictly increasing")


def axis_density(tmap: TransportMap, ref, k: int, x: np.ndarray) -> np.ndarray:
    """Pushed 1D density of axis ``k`` at interior points ``x``."""
    params = tmap.axis_params(k)
    z = invert_axis(params, tmap.L, tmap.n_ode, x)
    z = np.clip(z, np.nextafter(-tmap.L, 0.0), np.nextafter(tmap.L, 0.0))
    _, ell, _, _ = _forward_axis(params, tmap.L, tmap.n_ode, z, keep=False, check=False)[0]
    return np.exp(ref.log_density(z) - ell)


def reconstruct_u(tmap: TransportMap, refs, n: int = 1001, normalize: bool = True
                  ) -> GridFunction:
    """``u = sqrt(rho)`` of the pushed density on an ``n``-node grid per axis.

    Under the product map the density factorises, so each axis is computed
    on its own 1D grid and combined by an outer product.
    """
    if not isinstance(refs, (list, tuple)):
        refs = [refs] * tmap.d
    check_monotone(tmap)
    x = np.linspace(-tmap.L, tmap.L, n)
    factors = []
    for k in range(tmap.d):
        r = np.zeros(n)
        r[1:-1] = axis_density(tmap, refs[k], k, x[1:-1])
        factors.append(np.sqrt(r))
    u = factors[0]
    for f in factors[1:]:
        u = np.multiply.outer(u, f)
    g = GridFunction(np.array(u), float(tmap.L))
    _zero_boundary(g.values)
    return g.normalized() if normalize else g


def fd_grid(n_interior: int, L: float) -> np.ndarray:
    """Node coordinates (with boundary) of an FD grid with ``n`` interior nodes."""
    return np.linspace(-L, L, n_interior + 2)


def interpolate_to_fd(u: GridFunction, n_interior: int, L: float | None = None,
                      normalize: bool = True) -> GridFunction:
    """Multilinear interpolation onto an FD grid with ``n_interior`` interior nodes per axis."""
    if L is not None and not np.isclose(L, u.L, rtol=0, atol=1e-12):
        raise ValueError(f"domain mismatch: source L={u.L}, target L={L}")
    ax = u.axis
    interp = RegularGridInterpolator((ax,) * u.d, u.values, method="linear")
    t = fd_grid(n_interior, u.L)
    mesh = np.meshgrid(*([t[1:-1]] * u.d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    v = np.zeros((n_interior + 2,) * u.d)
    v[(slice(1, -1),) * u.d] = interp(pts).reshape((n_interior,) * u.d)
    g = GridFunction(v, u.L)
    return g.normalized() if normalize else g


def l2_error(u: GridFunction, exact) -> float:
    """Nodal L2 distance to a callable evaluated on the tensor grid."""
    mesh = np.meshgrid(*([u.axis] * u.d), indexing="ij")
    diff = u.values - exact(*mesh)
    return float(np.sqrt(u.h ** u.d * np.sum(diff ** 2)))
