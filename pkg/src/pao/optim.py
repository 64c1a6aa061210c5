"""Box-constrained maximization of a beam objective: genetic and multi-start gradient search.

Objectives map an :class:`Angles` (boresight-relative beam, radians) to a
scalar, normally the twin's SINR in dB.  Both optimizers respect an
evaluation budget ``max_evals`` and keep a best-so-far trace of
``(evaluations, best value)`` pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np

from .array import Angles

Objective = Callable[[Angles], float]
HALF_PI = math.pi / 2


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "GA"
    az_bounds: tuple[float, float] = (-HALF_PI, HALF_PI)
    el_bounds: tuple[float, float] = (-HALF_PI, HALF_PI)
    max_evals: int | None = None
    seed: int = 0
    tol_db: float = 0.01
    # genetic search
    population: int = 40
    generations: int = 60
    tournament: int = 3
    crossover_rate: float = 0.9
    blend_alpha: float = 0.5
    mutation_std: float = math.radians(5.0)
    mutation_rate: float = 0.1
    elitism: int = 2
    patience: int | None = 5
    # multi-start gradient search
    starts: int = 100
    fd_step: float = math.radians(0.5)
    initial_step: float = math.radians(10.0)
    ls_shrink: float = 0.5
    ls_trials: int = 20
    ascent_tol_db: float = 1e-4
    max_iter: int = 100
    dedup_radius: float = math.radians(1.0)
    start_patience: int | None = None
    # exhaustive grid
    grid_step: float = math.radians(0.5)

    def __post_init__(self):
        if self.kind not in ("GA", "GBO", "GRID"):
            raise OptimizerError(f"unknown optimizer kind {self.kind!r}")
        if self.population < 2 or self.starts < 1:
            raise OptimizerError("population must be >= 2 and starts >= 1")
        if self.max_evals is not None and self.max_evals < 1:
            raise OptimizerError("max_evals must be >= 1")
        for lo, hi in (self.az_bounds, self.el_bounds):
            if not hi > lo:
                raise OptimizerError("empty search box")
        if not 0 <= self.elitism < self.population:
            raise OptimizerError("elitism must be smaller than the population")

    @property
    def lo(self) -> np.ndarray:
        return np.array([self.az_bounds[0], self.el_bounds[0]])

    @property
    def hi(self) -> np.ndarray:
        return np.array([self.az_bounds[1], self.el_bounds[1]])

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PaoResult:
    theta_hat: Angles
    sinr_db: float
    sinr_trace: list[tuple[int, float]]
    evaluations: int
    positions_used: np.ndarray | None = None
    local_maxima: list[tuple[Angles, float]] = field(default_factory=list)
    completions: list[int] = field(default_factory=list)
    per_start: list[tuple[Angles, float]] = field(default_factory=list)


class _Exhausted(Exception):
    pass


class _Counted:
    """Objective wrapper: bounds assertion, budget, best-so-far bookkeeping."""

    def __init__(self, fn: Objective, cfg: OptimizerConfig, trace_every_eval: bool):
        self.fn = fn
        self.lo = cfg.lo
        self.hi = cfg.hi
        self.budget = cfg.max_evals
        self.n = 0
        self.best_x: np.ndarray | None = None
        self.best_f = -math.inf
        self.trace: list[tuple[int, float]] = []
        self.every = trace_every_eval

    def __call__(self, x: np.ndarray) -> float:
        if self.budget is not None and self.n >= self.budget:
            raise _Exhausted
        assert np.all(x >= self.lo - 1e-12) and np.all(x <= self.hi + 1e-12), f"out of bounds: {x}"
        f = float(self.fn(Angles(float(x[0]), float(x[1]))))
        if math.isnan(f):
            f = -math.inf
        self.n += 1
        if f > self.best_f:
            self.best_f = f
            self.best_x = x.copy()
        if self.every:
            self.trace.append((self.n, self.best_f))
        return f


def _angles(x) -> Angles:
    return Angles(float(x[0]), float(x[1]))


def ga_optimize(objective: Objective, cfg: OptimizerConfig = OptimizerConfig()) -> PaoResult:
    """Real-coded genetic search with tournament selection, blend crossover,
    Gaussian mutation and elitism; returns the best individual ever seen."""
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.lo, cfg.hi
    f = _Counted(objective, cfg, trace_every_eval=True)
    pop = rng.uniform(lo, hi, size=(cfg.population, 2))
    fit = np.full(cfg.population, -np.inf)
    try:
        for i in range(cfg.population):
            fit[i] = f(pop[i])
        stale = 0
        last_best = f.best_f
        for _ in range(cfg.generations - 1):
            order = np.argsort(-fit, kind="stable")
            children = [pop[i].copy() for i in order[:cfg.elitism]]
            child_fit = [fit[i] for i in order[:cfg.elitism]]

            def pick() -> np.ndarray:
                cand = rng.integers(0, cfg.population, size=cfg.tournament)
                return pop[cand[np.argmax(fit[cand])]]

            fresh = []
            while len(children) + len(fresh) < cfg.population:
                a, b = pick(), pick()
                if rng.random() < cfg.crossover_rate:
                    u = rng.uniform(-cfg.blend_alpha, 1.0 + cfg.blend_alpha, size=2)
                    c = a + u * (b - a)
                else:
                    c = a.copy()
                mut = rng.random(2) < cfg.mutation_rate
                c = c + mut * rng.normal(0.0, cfg.mutation_std, size=2)
                fresh.append(np.clip(c, lo, hi))
            pop = np.array(children + fresh)
            fit = np.array(child_fit + [-np.inf] * len(fresh))
            for i in range(len(children), cfg.population):
                fit[i] = f(pop[i])
            if f.best_f - last_best < cfg.tol_db:
                stale += 1
            else:
                stale = 0
            last_best = max(last_best, f.best_f)
            if cfg.patience is not None and stale >= cfg.patience:
                break
    except _Exhausted:
        pass
    return PaoResult(_angles(f.best_x), f.best_f, f.trace, f.n)


def _local_ascent(f: _Counted, x0: np.ndarray, cfg: OptimizerConfig) -> tuple[np.ndarray, float, bool]:
    """Projected gradient ascent with central differences and backtracking.

    Returns the final point, its value and whether the budget ran out.
    """
    lo, hi = cfg.lo, cfg.hi
    x = x0.copy()
    try:
        fx = f(x)
    except _Exhausted:
        return x, -math.inf, True
    step = cfg.initial_step
    try:
        for _ in range(cfg.max_iter):
            grad = np.zeros(2)
            for d in range(2):
                xp = x.copy()
                xm = x.copy()
                xp[d] = min(x[d] + cfg.fd_step, hi[d])
                xm[d] = max(x[d] - cfg.fd_step, lo[d])
                if xp[d] > xm[d]:
                    grad[d] = (f(xp) - f(xm)) / (xp[d] - xm[d])
            gn = float(np.linalg.norm(grad))
            if gn == 0.0 or not math.isfinite(gn):
                break
            direction = grad / gn
            t = min(2.0 * step, cfg.initial_step * 4)
            accepted = False
            for _ in range(cfg.ls_trials):
                xn = np.clip(x + t * direction, lo, hi)
                if np.allclose(xn, x, rtol=0, atol=1e-12):
                    t *= cfg.ls_shrink
                    continue
                fn = f(xn)
                if fn > fx:
                    accepted = True
                    break
                t *= cfg.ls_shrink
            if not accepted:
                break
            gain = fn - fx
            x, fx, step = xn, fn, t
            if gain < cfg.ascent_tol_db:
                break
    except _Exhausted:
        return x, fx, True
    return x, fx, False


def gbo_optimize(objective: Objective, cfg: OptimizerConfig = OptimizerConfig(kind="GBO")) -> PaoResult:
    """Multi-start local ascent; the answer is the best of the deduplicated local maxima.

    The best-so-far trace only moves when an ascent completes.  Starting
    points come from one rng stream, so a run with fewer starts uses a prefix
    of the starts of a larger run with the same seed.
    """
    rng = np.random.default_rng(cfg.seed)
    starts = rng.uniform(cfg.lo, cfg.hi, size=(cfg.starts, 2))
    f = _Counted(objective, cfg, trace_every_eval=False)
    found: list[tuple[np.ndarray, float]] = []
    trace: list[tuple[int, float]] = []
    completions: list[int] = []
    best = -math.inf
    stale = 0
    for x0 in starts:
        x, fx, out = _local_ascent(f, x0, cfg)
        if math.isfinite(fx):
            found.append((x, fx))
            improved = fx > best + cfg.tol_db
            best = max(best, fx)
            completions.append(f.n)
            trace.append((f.n, best))
            stale = 0 if improved else stale + 1
        if out or (cfg.start_patience is not None and stale >= cfg.start_patience):
            break
    unique: list[tuple[np.ndarray, float]] = []
    for x, fx in found:
        for i, (u, fu) in enumerate(unique):
            if np.linalg.norm(x - u) <= cfg.dedup_radius:
                if fx > fu:
                    unique[i] = (x, fx)
                break
        else:
            unique.append((x, fx))
    if not unique:
        raise OptimizerError("no objective evaluations were possible")
    xb, fb = max(unique, key=lambda t: t[1])
    return PaoResult(_angles(xb), fb, trace, f.n,
                     local_maxima=[(_angles(x), fx) for x, fx in unique], completions=completions,
                     per_start=[(_angles(x), fx) for x, fx in found])


def grid_axes(cfg: OptimizerConfig) -> tuple[np.ndarray, np.ndarray]:
    def axis(lo, hi):
        n = int(math.floor((hi - lo) / cfg.grid_step + 1e-9)) + 1
        return lo + cfg.grid_step * np.arange(n)
    return axis(*cfg.az_bounds), axis(*cfg.el_bounds)


def grid_optimize(vector_objective: Callable[[np.ndarray, np.ndarray], np.ndarray],
                  cfg: OptimizerConfig = OptimizerConfig(kind="GRID")) -> PaoResult:
    """Exhaustive search on a regular grid; ``vector_objective(az, el)`` takes arrays."""
    az, el = grid_axes(cfg)
    A, E = np.meshgrid(az, el, indexing="ij")
    vals = np.asarray(vector_objective(A, E), dtype=float)
    i = int(np.nanargmax(vals))
    return PaoResult(Angles(float(A.flat[i]), float(E.flat[i])), float(vals.flat[i]),
                     [(vals.size, float(vals.flat[i]))], vals.size)


def optimize(objective, cfg: OptimizerConfig) -> PaoResult:
    """Dispatch on ``cfg.kind``; GRID needs an objective accepting arrays."""
    if cfg.kind == "GA":
        return ga_optimize(objective, cfg)
    if cfg.kind == "GBO":
        return gbo_optimize(objective, cfg)
    return grid_optimize(objective, cfg)
