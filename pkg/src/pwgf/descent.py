"""Natural-gradient descent over transport-map parameters.

One step: evaluate ``E`` and ``grad E`` at the particles, assemble the
pullback metric, solve ``(G + eps I) xi = grad E`` by CG, clip ``xi`` to
norm ``C`` and try ``theta - alpha xi``.  If the trial energy rises by more
than ``E_tol`` the step falls back to ``theta - alpha grad/|grad|``.  The
particle set is drawn once and kept for the whole run.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyBreakdown, energy, energy_gradient
from .metric import assemble_metric_blocks, metric_matvec, natural_direction
from .potentials import Potential, make_potential
from .reference import (ConfigurationError, ReferenceDensity, ParticleSet,
                        sample_sign_symmetric)
from .transport import TransportError, TransportMap

# Table-1 hyperparameters plus the problem definition for each experiment.
EXPERIMENTS = {
    "gpe1d": dict(d=1, N=3000, K=400, alpha=0.005, H=10, n_ode=10, n_cg=100,
                  E_tol=0.05, clip=10.0, potential="cos1d", beta=10.0,
                  reference="beta22", L=1.0),
    "gpe2d": dict(d=2, N=3000, K=400, alpha=0.005, H=10, n_ode=10, n_cg=200,
                  E_tol=0.05, clip=10.0, potential="lattice2d", beta=10.0,
                  reference="gaussmix", L=16.0),
    "gpe3d": dict(d=3, N=6000, K=400, alpha=0.005, H=10, n_ode=10, n_cg=300,
                  E_tol=5.0, clip=50.0, potential="traplattice3d", beta=1600.0,
                  reference="beta55", L=8.0),
}


class PwgfError(RuntimeError):
    """Failure inside a run; ``record`` holds the steps completed so far."""

    def __init__(self, msg, record=None):
        super().__init__(msg)
        self.record = record


@dataclass
class PwgfConfig:
    d: int = 1
    N: int = 3000
    K: int = 400
    alpha: float = 0.005
    H: int = 10
    n_ode: int = 10
    n_cg: int = 100
    E_tol: float = 0.05
    clip: float = 10.0
    eps: float = 1e-6
    seed: int = 0
    potential: str = "cos1d"
    beta: float = 10.0
    reference: str = "beta22"
    L: float = 1.0
    init_scale: float = 0.01
    centers: tuple = (-12.0, -8.0, -4.0, 0.0, 4.0, 8.0, 12.0)
    sigma: float = 1.5
    solver: str = "cg"
    experiment: str = "custom"

    @classmethod
    def for_experiment(cls, name: str, **overrides) -> "PwgfConfig":
        if name not in EXPERIMENTS:
            raise ConfigurationError(
                f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
        cfg = cls(experiment=name, **EXPERIMENTS[name])
        return cfg.replace(**overrides)

    def replace(self, **kw) -> "PwgfConfig":
        cfg = dataclasses.replace(self, **kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name in ("d", "N", "K", "H", "n_ode", "n_cg"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        for name in ("alpha", "E_tol", "clip", "eps", "L", "init_scale"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.beta < 0:
            raise ConfigurationError("beta must be non-negative")
        if self.N % (2 ** self.d):
            raise ConfigurationError(
                f"N={self.N} must be divisible by 2**d={2 ** self.d} "
                "(sign-symmetric sampling)")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["centers"] = list(self.centers)
        return out

    def reference_density(self) -> ReferenceDensity:
        if self.reference == "gaussmix":
            return ReferenceDensity.gaussmix(self.L, self.centers, self.sigma)
        return ReferenceDensity(self.reference, float(self.L))

    def make_potential(self) -> Potential:
        p = make_potential(self.potential, self.beta)
        if p.d != self.d:
            raise ConfigurationError(
                f"potential {self.potential!r} is {p.d}-dimensional but d={self.d}")
        return dataclasses.replace(p, L=self.L)


@dataclass
class StepLog:
    k: int
    E: float
    F_Q: float
    F_V: float
    F_R: float
    lam: float
    grad_norm: float
    xi_norm: float
    xi_norm_clipped: float
    accepted: bool
    cg_residual: float
    E_trial: float


@dataclass
class RunRecord:
    config: PwgfConfig
    steps: list = field(default_factory=list)
    best_E: float = np.inf
    best_step: int = -1
    best_theta: np.ndarray | None = None
    best_breakdown: EnergyBreakdown | None = None
    timings: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def offer(self, E: float, theta: np.ndarray, step: int) -> None:
        # strict '<' keeps the earliest step on ties
        if E < self.best_E:
            self.best_E, self.best_step, self.best_theta = float(E), step, theta.copy()

    @property
    def best_lam(self) -> float:
        if self.best_breakdown is not None:
            return self.best_breakdown.lam
        for s in self.steps:
            if s.k == self.best_step:
                return s.lam
        return float("nan")

    def to_csv(self, path) -> None:
        names = [f.name for f in dataclasses.fields(StepLog)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for s in self.steps:
                w.writerow([_fmt(getattr(s, n)) for n in names])

    def summary(self) -> dict:
        b = self.best_breakdown
        parts = {} if b is None else dict(best_F_Q=b.F_Q, best_F_V=b.F_V, best_F_R=b.F_R)
        return dict(best_E=self.best_E, best_lam=self.best_lam, best_step=self.best_step,
                    **parts,
                    n_steps=len(self.steps),
                    n_rejected=sum(not s.accepted for s in self.steps),
                    wall_time=self.wall_time, timings=self.timings,
                    seed=self.config.seed, config=self.config.to_dict(),
                    best_theta=None if self.best_theta is None else self.best_theta.tolist())

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def setup(config: PwgfConfig):
    """Initial map, particle set and potential for a configuration."""
    config.validate()
    ref = config.reference_density()
    particles = sample_sign_symmetric(ref, config.d, config.N, config.seed)
    # separate stream for the weights so they do not depend on N
    rng = np.random.default_rng([config.seed, 1])
    tmap = TransportMap.initial(config.d, config.H, config.L, config.n_ode, rng,
                                scale=config.init_scale)
    return tmap, particles, config.make_potential()


def _clip(v, C):
    n = float(np.linalg.norm(v))
    return (v * min(1.0, C / n) if n > 0 else v), n


def pwgf_step(tmap: TransportMap, particles: ParticleSet, potential: Potential,
              config: PwgfConfig, k: int = 0, timings: dict | None = None):
    """One safeguarded natural-gradient step.

    Returns ``(theta_next, StepLog)``.
    """
    t = timings if timings is not None else {}
    t0 = time.perf_counter()
    e, grad, blocks = energy_gradient(tmap, particles, potential, config.beta,
                                      with_jacobian=True)
    t1 = time.perf_counter()
    if config.solver == "matfree":
        res = natural_direction(metric_matvec(blocks), grad, config.n_cg, config.eps)
    else:
        G = assemble_metric_blocks(blocks)
        res = natural_direction(G, grad, config.n_cg, config.eps,
                                method="minres" if config.solver == "minres" else "cg")
    t2 = time.perf_counter()
    xi, xi_norm = _clip(res.x, config.clip)
    gnorm = float(np.linalg.norm(grad))
    theta = tmap.theta
    trial = theta - config.alpha * xi
    try:
        E_trial = energy(tmap.with_theta(trial), particles, potential, config.beta).E
    except TransportError:
        E_trial = np.inf
    accepted = bool(E_trial <= e.E + config.E_tol)
    if not accepted:
        step = grad / gnorm if gnorm > 0 else grad
        trial = theta - config.alpha * _clip(step, config.clip)[0]
    t3 = time.perf_counter()
    for key, dt in (("forward_gradient_jacobian", t1 - t0), ("cg", t2 - t1),
                    ("trial", t3 - t2)):
        t[key] = t.get(key, 0.0) + dt
    log = StepLog(k=k, E=e.E, F_Q=e.F_Q, F_V=e.F_V, F_R=e.F_R, lam=e.lam,
                  grad_norm=gnorm, xi_norm=xi_norm,
                  xi_norm_clipped=float(np.linalg.norm(xi)), accepted=accepted,
                  cg_residual=float(res.residual), E_trial=float(E_trial))
    return trial, log


def run(config: PwgfConfig, callback=None, setup_result=None) -> RunRecord:
    """Execute ``K`` steps and track the lowest-energy parameters.

    ``callback(log, tmap)`` is called after every step with the map the
    log entry was evaluated at.
    """
    tmap, particles, potential = setup_result or setup(config)
    rec = RunRecord(config=config)
    start = time.perf_counter()
    for k in range(config.K):
        try:
            theta_next, log = pwgf_step(tmap, particles, potential, config, k, rec.timings)
        except Exception as exc:
            rec.wall_time = time.perf_counter() - start
            raise PwgfError(f"step {k} failed: {exc}", rec) from exc
        rec.steps.append(log)
        rec.offer(log.E, tmap.theta, k)
        if log.accepted:
            rec.offer(log.E_trial, theta_next, k + 1)
        tmap = tmap.with_theta(theta_next)
        if callback is not None:
            callback(log, tmap)
    if rec.best_theta is not None:
        rec.best_breakdown = energy(tmap.with_theta(rec.best_theta), particles, potential,
                                    config.beta)
    rec.wall_time = time.perf_counter() - start
    return rec


def best_map(record: RunRecord) -> TransportMap:
    c = record.config
    return TransportMap(c.d, c.H, c.L, c.n_ode, record.best_theta)


def energy_at(record: RunRecord, theta=None) -> EnergyBreakdown:
    """Re-evaluate the particle energy of ``theta`` (default: best) for a record."""
    tmap, particles, potential = setup(record.config)
    th = record.best_theta if theta is None else theta
    return energy(tmap.with_theta(th), particles, potential, record.config.beta)
