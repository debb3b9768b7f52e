"""Experiment pipelines: PWGF runs, H1 reference runs, warm starts and ablations.

Every pipeline writes into ``<out>/<id>/<timestamp>/``.  CSV files carry
only deterministic quantities so that a rerun with the same configuration
reproduces them byte for byte; wall times go to the JSON summary.
"""
from __future__ import annotations

import configparser
import dataclasses
import datetime as _dt
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .descent import PwgfConfig, RunRecord, best_map, run
from .h1 import (FdProblem, constant_init, fd_energy, h1_solve, random_init)
from .potentials import exact_1d
from .reconstruct import GridFunction, interpolate_to_fd, l2_error, reconstruct_u
from .reference import ConfigurationError

# FD grid and export resolution per dimension
FD_DEFAULTS = {1: None, 2: 200, 3: 99}
RECON_DEFAULTS = {1: 1001, 2: 40, 3: 40}


@dataclass
class ExperimentConfig:
    pwgf: PwgfConfig
    fd_n: int | None = None
    tau: float = 0.9
    h1_tol: float = 1e-12
    h1_max_steps: int = 5000
    warm_tol: float = 1e-4     # |E_k - E*_h| threshold for steps-to-tolerance
    recon_n: int | None = None
    error_every: int = 1       # 1D: evaluate |u - u*| every this many steps
    out: str = "runs"

    def __post_init__(self):
        d = self.pwgf.d
        if self.fd_n is None:
            self.fd_n = FD_DEFAULTS.get(d)
        if self.recon_n is None:
            self.recon_n = RECON_DEFAULTS.get(d, 40)

    @property
    def id(self) -> str:
        return self.pwgf.experiment

    def to_dict(self) -> dict:
        out = {k: v for k, v in dataclasses.asdict(self).items() if k != "pwgf"}
        out["pwgf"] = self.pwgf.to_dict()
        return out


_PWGF_FIELDS = {f.name.lower() for f in dataclasses.fields(PwgfConfig)}


def _canonical(cls, key):
    names = {f.name.lower(): f.name for f in dataclasses.fields(cls)}
    if key.lower() not in names:
        raise ConfigurationError(f"unknown setting {key!r} for {cls.__name__}")
    return names[key.lower()]


def _coerce(cls, key, raw):
    names = {f.name: f for f in dataclasses.fields(cls)}
    default = names[key].default
    if key == "centers":
        return tuple(float(x) for x in str(raw).replace(",", " ").split())
    if isinstance(raw, str):
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int) or key in ("fd_n", "recon_n"):
            try:
                return int(raw)
            except ValueError:
                raise ConfigurationError(f"{key} must be an integer, got {raw!r}") from None
        if isinstance(default, float):
            try:
                return float(raw)
            except ValueError:
                raise ConfigurationError(f"{key} must be a number, got {raw!r}") from None
    return raw


def make_config(experiment: str = "gpe1d", path=None, overrides: dict | None = None,
                seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    """Table-1 defaults, then an INI file, then explicit overrides.

    The INI file may contain ``[pwgf]``, ``[fd]`` and ``[output]`` sections;
    keys are the field names of :class:`PwgfConfig` / :class:`ExperimentConfig`.
    Overrides use the same names; FD keys may be given as ``fd.<name>``.
    """
    pw, ex = {}, {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file {path} not found")
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp.read(path)
        for sec in cp.sections():
            for k, v in cp[sec].items():
                if sec == "pwgf":
                    pw[k] = v
                elif sec in ("fd", "output"):
                    ex[k] = v
                else:
                    raise ConfigurationError(f"unknown config section [{sec}]")
        if "experiment" in pw:
            experiment = pw.pop("experiment")
    for k, v in (overrides or {}).items():
        if k.startswith("fd.") or k.startswith("output."):
            ex[k.split(".", 1)[1]] = v
        elif k.lower() in _PWGF_FIELDS:
            pw[k] = v
        else:
            ex[k] = v
    if seed is not None:
        pw["seed"] = seed
    if out is not None:
        ex["out"] = out
    pw = {_canonical(PwgfConfig, k): v for k, v in pw.items()}
    pw = {k: _coerce(PwgfConfig, k, v) for k, v in pw.items()}
    if experiment == "custom":
        base = PwgfConfig(**pw)
        base.validate()
    else:
        base = PwgfConfig.for_experiment(experiment, **pw)
    ex = {_canonical(ExperimentConfig, k): v for k, v in ex.items()}
    ex = {k: _coerce(ExperimentConfig, k, v) for k, v in ex.items()}
    return ExperimentConfig(base, **ex)


def run_dir(out, exp_id: str, stamp: str | None = None) -> Path:
    stamp = stamp or _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%f")
    p = Path(out) / exp_id / stamp
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=_jsonable))


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o))


def exact_error_1d(tmap, ref, beta: float, n: int = 1001) -> float:
    u = reconstruct_u(tmap, ref, n)
    return l2_error(u, lambda x: exact_1d(x, beta)[0])


class ErrorTracker:
    """Run callback recording ``|u_theta - u*|`` of the 1D problem."""

    def __init__(self, config: PwgfConfig, every: int = 1, n: int = 1001):
        self.ref = config.reference_density()
        self.beta = config.beta
        self.every = max(1, int(every))
        self.n = n
        self.errors: list[tuple[int, float]] = []

    def __call__(self, log, tmap):
        if log.k % self.every == 0:
            self.errors.append((log.k, exact_error_1d(tmap, self.ref, self.beta, self.n)))

    @property
    def best(self) -> float:
        return min(e for _, e in self.errors) if self.errors else float("nan")

    @property
    def final(self) -> float:
        return self.errors[-1][1] if self.errors else float("nan")


@dataclass
class PwgfOutcome:
    record: RunRecord
    grid: GridFunction
    directory: Path | None = None
    errors: ErrorTracker | None = None
    summary: dict = field(default_factory=dict)


def run_pwgf(cfg: ExperimentConfig, directory=None, track_error: bool | None = None,
             callback=None) -> PwgfOutcome:
    """Train a map, reconstruct ``u`` from its best parameters and write artifacts."""
    pc = cfg.pwgf
    if track_error is None:
        track_error = pc.d == 1 and pc.potential == "cos1d"
    tracker = ErrorTracker(pc, cfg.error_every) if track_error else None

    def cb(log, tmap):
        if tracker is not None:
            tracker(log, tmap)
        if callback is not None:
            callback(log, tmap)

    rec = run(pc, cb)
    t0 = time.perf_counter()
    grid = reconstruct_u(best_map(rec), pc.reference_density(), cfg.recon_n)
    rec.timings["reconstruction"] = time.perf_counter() - t0
    summary = rec.summary()
    summary["experiment"] = cfg.to_dict()
    if tracker is not None:
        summary["best_l2_error"] = tracker.best
        summary["final_l2_error"] = tracker.final
        summary["l2_error_at_best_theta"] = exact_error_1d(best_map(rec), tracker.ref,
                                                           pc.beta, tracker.n)
    out = PwgfOutcome(rec, grid, None, tracker, summary)
    if directory is not None:
        d = Path(directory)
        rec.to_csv(d / "steps.csv")
        grid.save(d / "u")
        if pc.d == 1:
            grid.to_csv(d / "u.csv")
        if tracker is not None:
            with open(d / "errors.csv", "w") as fh:
                fh.write("k,l2_error\n")
                for k, e in tracker.errors:
                    fh.write(f"{k},{e!r}\n")
        _write_json(d / "summary.json", summary)
        out.directory = d
    return out


def fd_problem(cfg: ExperimentConfig) -> FdProblem:
    if cfg.fd_n is None:
        raise ConfigurationError("fd_n must be set for finite-difference runs")
    return FdProblem.from_potential(cfg.pwgf.make_potential(), cfg.fd_n, cfg.pwgf.L)


def initial_guess(kind: str, prob: FdProblem, grid: GridFunction | None = None):
    if kind == "constant":
        return constant_init(prob)
    if kind == "random":
        return random_init(prob, 42)
    if kind == "warm":
        if grid is None:
            raise ConfigurationError("warm start needs a reconstructed grid function")
        return interpolate_to_fd(grid, prob.n, prob.L).interior
    raise ConfigurationError(f"unknown initial guess {kind!r}")


def run_h1(cfg: ExperimentConfig, init: str = "constant", grid=None, directory=None):
    prob = fd_problem(cfg)
    u0 = initial_guess(init, prob, grid)
    res = h1_solve(u0, prob, cfg.tau, cfg.h1_max_steps, cfg.h1_tol)
    if directory is not None:
        d = Path(directory)
        res.to_csv(d / f"h1_{init}.csv")
        _write_json(d / f"h1_{init}.json",
                    dict(init=init, E=res.E, lam=res.lam, converged=res.converged,
                         steps=len(res.history) - 1, experiment=cfg.to_dict()))
    return res


WARM_ROWS = (("constant", "Constant one"), ("random", "Random |N(0,1)|, seed 42"),
             ("warm", "PWGF warm start"))


def warmstart(cfg: ExperimentConfig, grid: GridFunction, directory=None,
              E_ref: float | None = None, max_steps: int | None = None):
    """H1 from the three initial guesses; returns the comparison rows.

    ``E_ref`` defaults to the converged energy of the constant-one run.
    """
    prob = fd_problem(cfg)
    steps = cfg.h1_max_steps if max_steps is None else max_steps
    results = {}
    for key, _ in WARM_ROWS:
        u0 = initial_guess(key, prob, grid)
        results[key] = (fd_energy(u0, prob)[0], h1_solve(u0, prob, cfg.tau, steps, cfg.h1_tol))
    if E_ref is None:
        E_ref = results["constant"][1].E
    rows = []
    for key, label in WARM_ROWS:
        E0, res = results[key]
        E1 = res.history[1][1] if len(res.history) > 1 else E0
        hit = res.steps_to(E_ref, cfg.warm_tol)
        rows.append(dict(init=key, label=label, E0=E0, E1_gap=abs(E1 - E_ref),
                         steps_to_tol=hit, E_final=res.E, steps=len(res.history) - 1))
    if directory is not None:
        d = Path(directory)
        with open(d / "warmstart.csv", "w") as fh:
            fh.write("init,E0,abs_E1_minus_Eref,steps_to_tol\n")
            for r in rows:
                s = "" if r["steps_to_tol"] is None else r["steps_to_tol"]
                fh.write(f"{r['init']},{r['E0']!r},{r['E1_gap']!r},{s}\n")
        for key, _ in WARM_ROWS:
            results[key][1].to_csv(d / f"h1_{key}.csv")
        _write_json(d / "warmstart.json", dict(E_ref=E_ref, warm_tol=cfg.warm_tol,
                                               rows=rows, experiment=cfg.to_dict()))
    return rows, E_ref


ABLATION_AXES = {"N": "N", "H": "H", "N_ODE": "n_ode", "n_ode": "n_ode"}


def ablation(cfg: ExperimentConfig, axis: str, values, seeds=(0,), directory=None):
    """Vary one 1D hyperparameter and record the best and final ``|u - u*|``."""
    if cfg.pwgf.d != 1:
        raise ConfigurationError("ablations are defined for the 1D experiment")
    if axis not in ABLATION_AXES:
        raise ConfigurationError(f"axis must be one of N, H, N_ODE (got {axis!r})")
    name = ABLATION_AXES[axis]
    rows = []
    for v in values:
        for s in seeds:
            pc = cfg.pwgf.replace(**{name: int(v), "seed": int(s)})
            tr = ErrorTracker(pc, cfg.error_every)
            rec = run(pc, tr)
            rows.append(dict(axis=axis, value=int(v), seed=int(s), best_err=tr.best,
                             final_err=tr.final, best_E=rec.best_E))
    if directory is not None:
        with open(Path(directory) / f"ablation_{axis}.csv", "w") as fh:
            fh.write("axis,value,seed,best_err,final_err,best_E\n")
            for r in rows:
                fh.write(f"{r['axis']},{r['value']},{r['seed']},{r['best_err']!r},"
                         f"{r['final_err']!r},{r['best_E']!r}\n")
    return rows


def load_run(summary_path) -> tuple[ExperimentConfig, np.ndarray]:
    """Configuration and best parameters from a ``summary.json``."""
    path = Path(summary_path)
    if path.is_dir():
        path = path / "summary.json"
    if not path.exists():
        raise FileNotFoundError(f"run summary {path} not found")
    s = json.loads(path.read_text())
    ex = dict(s["experiment"])
    pc = dict(ex.pop("pwgf"))
    pc["centers"] = tuple(pc["centers"])
    cfg = ExperimentConfig(PwgfConfig(**pc), **ex)
    return cfg, np.asarray(s["best_theta"], dtype=float)
