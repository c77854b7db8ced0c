"""Mean-variance mapping optimisation with swarm hybridisation (MVMO-SH).

A bounded, derivative-free minimiser for expensive fitness functions.
Search happens in the unit hypercube; each particle keeps a small archive of
its best solutions, and new candidates are drawn by pushing uniform samples
through a mapping function shaped by the archive mean and variance.

Per-generation evaluation budget: ``particles`` evaluations, plus at most
``local_search_budget`` (default ``2 * d``) when the local search fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FitnessError, InvalidConfig


@dataclass(frozen=True)
class SearchSpace:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidConfig("bounds must be non-empty vectors of equal length")
        if not np.all(lo < hi):
            raise InvalidConfig("every lower bound must be below its upper bound")

    @property
    def dim(self) -> int:
        return self.lower.size

    def denormalize(self, x):
        return self.lower + np.clip(x, 0.0, 1.0) * (self.upper - self.lower)

    def normalize(self, y):
        return (np.asarray(y, dtype=float) - self.lower) / (self.upper - self.lower)


@dataclass(frozen=True)
class OptimizerConfig:
    generations: int = 600
    particles: int = 5
    archive_size: int = 4
    m_initial: int | None = None  # None: the problem dimension
    m_final: int = 1
    fs_initial: float = 1.0
    fs_final: float = 10.0
    seed: int = 0
    local_search_probability: float = 0.1
    local_search_budget: int | None = None  # None: 2 * dimension
    local_search_min_step: float = 0.005  # in unit-box coordinates

    def validate(self, dim: int):
        if self.generations < 1:
            raise InvalidConfig("generations must be >= 1")
        if self.particles < 1:
            raise InvalidConfig("particles must be >= 1")
        if self.archive_size < 2:
            raise InvalidConfig("archive_size must be >= 2")
        m_i = dim if self.m_initial is None else self.m_initial
        if not (1 <= self.m_final <= dim and 1 <= m_i <= dim):
            raise InvalidConfig(f"mutated dimensions must lie in [1, {dim}]")
        if not (self.fs_initial > 0 and self.fs_final > 0):
            raise InvalidConfig("shaping factors must be positive")
        if not 0.0 <= self.local_search_probability <= 1.0:
            raise InvalidConfig("local_search_probability must lie in [0, 1]")
        if self.local_search_budget is not None and self.local_search_budget < 0:
            raise InvalidConfig("local_search_budget must be >= 0")
        if not 0.0 < self.local_search_min_step <= 1.0:
            raise InvalidConfig("local_search_min_step must lie in (0, 1]")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class OptimizationResult:
    best_point: np.ndarray
    best_value: float
    evaluations_used: int
    seed: int
    trace: np.ndarray
    local_search_evaluations: int = 0
    extra: dict = field(default_factory=dict)


def _h(xbar, s1, s2, x):
    return xbar * (1.0 - np.exp(-x * s1)) + (1.0 - xbar) * np.exp(-(1.0 - x) * s2)


def mapping_h(xbar, s1, s2, x):
    """Map a uniform sample ``x`` to an offspring coordinate in [0, 1].

    The result concentrates around ``xbar`` as the shape factors grow;
    ``s1 = s2 = 0`` gives the identity.
    """
    h0 = _h(xbar, s1, s2, 0.0)
    h1 = _h(xbar, s1, s2, 1.0)
    hx = _h(xbar, s1, s2, x)
    return np.clip(hx + (1.0 - h1 + h0) * x - h0, 0.0, 1.0)


class _Archive:
    """The best ``size`` solutions of one particle, best first."""

    def __init__(self, size, dim):
        self.size = size
        self.x = np.empty((0, dim))
        self.f = np.empty(0)
        self.shape = np.zeros(dim)
        self.mean = np.zeros(dim)
        self.var = np.zeros(dim)

    def insert(self, x, fx) -> bool:
        n = len(self.f)
        if n >= self.size and not fx < self.f[-1]:
            return False
        k = int(np.searchsorted(self.f, fx, side="right"))
        self.x = np.concatenate([self.x[:k], x[None, :], self.x[k:]])[: self.size]
        self.f = np.concatenate([self.f[:k], [fx], self.f[k:]])[: self.size]
        self.mean = self.x.mean(axis=0)
        self.var = self.x.var(axis=0) if len(self.f) > 1 else np.zeros_like(self.var)
        return True

    @property
    def best_x(self):
        return self.x[0]

    @property
    def best_f(self):
        return self.f[0]

    def statistics(self, fs):
        positive = self.var > 0
        # zero variance keeps the previous shape factor
        self.shape[positive] = -np.log(self.var[positive]) * fs
        return self.mean, self.shape


def optimize(fitness, space: SearchSpace, config: OptimizerConfig | None = None) -> OptimizationResult:
    """Minimise ``fitness`` over the box ``space`` with MVMO-SH.

    ``fitness`` receives points in original units and may return ``inf``
    for invalid candidates (NaN is treated as ``inf``).  Exceptions it raises
    are re-raised as :class:`FitnessError` carrying the offending point.
    """
    cfg = config or OptimizerConfig()
    d = space.dim
    cfg.validate(d)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    m_i = d if cfg.m_initial is None else cfg.m_initial
    ls_budget = 2 * d if cfg.local_search_budget is None else cfg.local_search_budget
    n_bad = cfg.particles // 3 if cfg.particles >= 3 else 0

    evals = 0
    ls_evals = 0
    best_x = None
    best_f = math.inf

    def evaluate(xn):
        nonlocal evals, best_x, best_f
        y = space.denormalize(xn)
        try:
            fx = float(fitness(y))
        except Exception as exc:
            raise FitnessError(y, exc) from exc
        if math.isnan(fx):
            fx = math.inf
        evals += 1
        if best_x is None or fx < best_f:
            best_x, best_f = xn.copy(), fx
        return fx

    archives = [_Archive(cfg.archive_size, d) for _ in range(cfg.particles)]
    trace = np.empty(cfg.generations)
    G = cfg.generations

    for g in range(G):
        frac = g / (G - 1) if G > 1 else 1.0
        fs = cfg.fs_initial + (cfg.fs_final - cfg.fs_initial) * frac
        m = int(round(m_i + (cfg.m_final - m_i) * frac))

        if g == 0:
            for arc in archives:
                x = rng.random(d)
                arc.insert(x, evaluate(x))
        else:
            order = np.argsort([a.best_f for a in archives], kind="stable")
            bad = set(order[len(order) - n_bad:].tolist()) if n_bad else set()
            good = order[: len(order) - n_bad]
            for p, arc in enumerate(archives):
                mean, shape = arc.statistics(fs)
                if p in bad:
                    # multi-parent crossover toward the good part of the swarm
                    rg = archives[good[rng.integers(len(good))]].best_x
                    lg = archives[good[-1]].best_x
                    beta = 2.0 * rng.random()
                    parent = np.clip(rg + beta * (best_x - lg), 0.0, 1.0)
                    mean = parent
                else:
                    parent = arc.best_x
                x = parent.copy()
                dims = rng.choice(d, size=m, replace=False)
                u = rng.random(m)
                x[dims] = mapping_h(mean[dims], shape[dims], shape[dims], u)
                arc.insert(x, evaluate(x))

        if ls_budget > 0 and rng.random() < cfg.local_search_probability:
            ls_evals += _coordinate_descent(evaluate, best_x, best_f, archives, rng, ls_budget,
                                           cfg.local_search_min_step)
        trace[g] = best_f

    return OptimizationResult(space.denormalize(best_x), best_f, evals, cfg.seed,
                              trace, ls_evals)


def _coordinate_descent(evaluate, x0, f0, archives, rng, budget, min_step):
    """Greedy +/- step search around the incumbent; returns evaluations used.

    The step per coordinate is the spread of the leading archive, floored at
    ``min_step``.  A successful step is repeated with doubling length until
    it stops improving.
    """
    owner = min(archives, key=lambda a: a.best_f)
    spread = owner.x.std(axis=0) if len(owner.x) > 1 else np.zeros(len(x0))
    step = np.maximum(spread, min_step)
    x, fx = x0.copy(), f0
    used = 0
    for i in rng.permutation(len(x0)):
        for sign in (1.0, -1.0):
            if used >= budget:
                break
            trial = x.copy()
            trial[i] = np.clip(trial[i] + sign * step[i], 0.0, 1.0)
            ft = evaluate(trial)
            used += 1
            if ft < fx:
                x, fx = trial, ft
                s = step[i]
                while used < budget:
                    s *= 2.0
                    trial = x.copy()
                    trial[i] = np.clip(x[i] + sign * s, 0.0, 1.0)
                    ft = evaluate(trial)
                    used += 1
                    if not ft < fx:
                        break
                    x, fx = trial, ft
                break
    if fx < f0:
        owner.insert(x, fx)
    return used


def best_of_restarts(fitness, space: SearchSpace, config: OptimizerConfig | None = None,
                     n_restarts: int = 3) -> OptimizationResult:
    """Run ``optimize`` with seeds ``seed, seed+1, ...`` and keep the best run.

    Ties go to the lower seed.  The winning result's ``extra`` records every
    run's (seed, best_value) and the total evaluation count.
    """
    cfg = config or OptimizerConfig()
    if n_restarts < 1:
        raise InvalidConfig("n_restarts must be >= 1")
    runs = []
    for k in range(n_restarts):
        run_cfg = OptimizerConfig(**{**cfg.to_dict(), "seed": cfg.seed + k})
        runs.append(optimize(fitness, space, run_cfg))
    best = min(runs, key=lambda r: (r.best_value, r.seed))
    best.extra["runs"] = [(r.seed, r.best_value) for r in runs]
    best.extra["total_evaluations"] = sum(r.evaluations_used for r in runs)
    return best
