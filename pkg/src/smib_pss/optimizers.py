"""Real-coded genetic algorithm and particle swarm optimization over a box.

Both optimizers *maximize* the fitness. Runs are deterministic for a given
seed: random numbers are drawn in a fixed order from one generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .modal import analyze, objective_from_modes
from .model import (
    PSS_LOWER,
    PSS_UPPER,
    OperatingCondition,
    PssParams,
    SystemParams,
    build_closed_loop_for,
)

Fitness = Callable[[np.ndarray], float]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Bounds:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigError("bounds must be 1-D vectors of equal length")
        if not np.all(lo < hi):
            raise ConfigError("every lower bound must be below its upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def span(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lo + rng.random((n, self.dim)) * self.span


PSS_BOUNDS = Bounds(np.array(PSS_LOWER), np.array(PSS_UPPER))


@dataclass(frozen=True)
class GaConfig:
    pop_size: int = 20
    generations: int = 10
    generation_gap: float = 0.9
    p_crossover: float = 0.95
    p_mutation: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 2:
            raise ConfigError("pop_size must be at least 2")
        if self.generations < 0:
            raise ConfigError("generations must be non-negative")
        if not 0 < self.generation_gap <= 1:
            raise ConfigError("generation_gap must lie in (0, 1]")
        for name in ("p_crossover", "p_mutation"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 20
    generations: int = 10
    w_max: float = 1.0
    w_min: float = 0.5
    c1: float = 1.0
    c2: float = 1.0
    seed: int = 0
    v_max_fraction: float = 0.2
    zero_initial_velocity: bool = False

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ConfigError("swarm_size must be at least 1")
        if self.generations < 0:
            raise ConfigError("generations must be non-negative")
        if not self.w_max >= self.w_min > 0:
            raise ConfigError("need w_max >= w_min > 0")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigError("c1 and c2 must be non-negative")
        if self.v_max_fraction <= 0:
            raise ConfigError("v_max_fraction must be positive")


@dataclass
class OptimizationResult:
    best_x: np.ndarray
    best_fitness: float
    history: list[float] = field(default_factory=list)
    evaluations: int = 0


# ---------------------------------------------------------------------------
# PSO


def inertia_weight(w_max: float, w_min: float, iter_max: int, iter: int) -> float:
    """Linearly decreasing inertia weight."""
    if iter_max == 0:
        raise ValueError("iter_max must be positive")
    return w_max - ((w_max - w_min) / iter_max) * iter


def pso_velocity_update(v, x, pbest, gbest, w, c1, c2, rand1, rand2, v_max=None) -> np.ndarray:
    v, x, pbest, gbest = (np.asarray(a, dtype=float) for a in (v, x, pbest, gbest))
    if not (v.shape == x.shape == pbest.shape == gbest.shape):
        raise ValueError("velocity, position, pbest and gbest must share a shape")
    new = w * v + c1 * np.asarray(rand1) * (pbest - x) + c2 * np.asarray(rand2) * (gbest - x)
    if v_max is not None:
        new = np.clip(new, -np.asarray(v_max), np.asarray(v_max))
    return new


def pso_position_update(x, v_new, bounds: Bounds | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Move by ``v_new``; a component that leaves the box is clipped onto
    the boundary and its velocity zeroed. Returns ``(x', v')``."""
    x_new = np.asarray(x, dtype=float) + v_new
    v_out = np.array(v_new, dtype=float, copy=True)
    if bounds is not None:
        outside = (x_new < bounds.lo) | (x_new > bounds.hi)
        x_new = np.clip(x_new, bounds.lo, bounds.hi)
        v_out[outside] = 0.0
    return x_new, v_out


def _evaluate(fitness: Fitness, X: np.ndarray) -> np.ndarray:
    return np.array([float(fitness(x.copy())) for x in X])


def pso_optimize(fitness: Fitness, bounds: Bounds, cfg: PsoConfig = PsoConfig()) -> OptimizationResult:
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.swarm_size, bounds.dim
    v_max = cfg.v_max_fraction * bounds.span

    x = bounds.sample(rng, n)
    if cfg.zero_initial_velocity:
        v = np.zeros((n, d))
    else:
        v = (2.0 * rng.random((n, d)) - 1.0) * v_max

    f = _evaluate(fitness, x)
    evals = n
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmax(pbest_f))
    gbest, gbest_f = pbest[g].copy(), pbest_f[g]
    history = [gbest_f]

    for k in range(cfg.generations):
        w = inertia_weight(cfg.w_max, cfg.w_min, cfg.generations, k)
        r1 = rng.random((n, d))
        r2 = rng.random((n, d))
        v = pso_velocity_update(v, x, pbest, np.broadcast_to(gbest, (n, d)), w, cfg.c1, cfg.c2, r1, r2, v_max)
        x, v = pso_position_update(x, v, bounds)

        f = _evaluate(fitness, x)
        evals += n
        better = f > pbest_f
        pbest[better] = x[better]
        pbest_f[better] = f[better]
        g = int(np.argmax(pbest_f))
        if pbest_f[g] > gbest_f:
            gbest, gbest_f = pbest[g].copy(), pbest_f[g]
        history.append(gbest_f)

    return OptimizationResult(gbest, float(gbest_f), [float(h) for h in history], evals)


# ---------------------------------------------------------------------------
# GA


def roulette_probabilities(fitness: Sequence[float], floor: float = 1e-12) -> np.ndarray:
    """Selection probabilities proportional to fitness.

    Negative fitness is shifted up so the worst individual sits at zero;
    every mass is floored at ``floor``. A population with no mass left after
    shifting is selected uniformly.
    """
    f = np.asarray(fitness, dtype=float)
    mass = f - min(float(f.min()), 0.0)
    if not np.any(mass > 0):
        return np.full(f.size, 1.0 / f.size)
    mass = np.maximum(mass, floor)
    return mass / mass.sum()


def _roulette(rng: np.random.Generator, probs: np.ndarray, k: int) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(k), side="right")


def ga_optimize(fitness: Fitness, bounds: Bounds, cfg: GaConfig = GaConfig()) -> OptimizationResult:
    """Real-coded GA with roulette selection, blend crossover, uniform-reset
    mutation and elitism.

    Each generation ``generation_gap`` of the population is replaced by
    offspring; the best remaining individuals (at least one) carry over.
    """
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.pop_size, bounds.dim
    n_elite = max(1, int(round(n * (1.0 - cfg.generation_gap))))
    n_elite = min(n_elite, n)
    n_off = n - n_elite

    pop = bounds.sample(rng, n)
    f = _evaluate(fitness, pop)
    evals = n
    b = int(np.argmax(f))
    best_x, best_f = pop[b].copy(), f[b]
    history = [best_f]

    for _ in range(cfg.generations):
        order = np.argsort(-f, kind="stable")
        elite, elite_f = pop[order[:n_elite]], f[order[:n_elite]]

        probs = roulette_probabilities(f)
        n_pairs = (n_off + 1) // 2
        parents = _roulette(rng, probs, 2 * n_pairs).reshape(n_pairs, 2)
        cross = rng.random(n_pairs) < cfg.p_crossover
        alpha = rng.random(n_pairs)
        kids = np.empty((2 * n_pairs, d))
        for i, (a, bb) in enumerate(parents):
            pa, pb = pop[a], pop[bb]
            if cross[i]:
                kids[2 * i] = alpha[i] * pa + (1 - alpha[i]) * pb
                kids[2 * i + 1] = (1 - alpha[i]) * pa + alpha[i] * pb
            else:
                kids[2 * i] = pa
                kids[2 * i + 1] = pb
        kids = kids[:n_off]

        mutate = rng.random((n_off, d)) < cfg.p_mutation
        fresh = bounds.sample(rng, n_off)
        kids = np.where(mutate, fresh, kids)
        kids = np.clip(kids, bounds.lo, bounds.hi)

        kid_f = _evaluate(fitness, kids)
        evals += n_off
        pop = np.vstack([elite, kids])
        f = np.concatenate([elite_f, kid_f])

        b = int(np.argmax(f))
        if f[b] > best_f:
            best_x, best_f = pop[b].copy(), f[b]
        history.append(best_f)

    return OptimizationResult(best_x, float(best_f), [float(h) for h in history], evals)


# ---------------------------------------------------------------------------


FITNESS_SCOPES = ("all", "em")


def pss_fitness(
    system: SystemParams, op: OperatingCondition, T_w: float = 10.0, scope: str = "all"
) -> Fitness:
    """Fitness of a stabilizer vector ``[K_s, T1, T2]``.

    ``scope="em"`` scores the minimum electromechanical damping ratio, except
    that any mode with a non-negative real part drags the score down to that
    mode's damping ratio (<= 0), so trading rotor damping for an unstable
    exciter mode never wins. ``scope="all"`` (default) additionally takes
    the minimum over every oscillatory mode, which keeps the tuned loop from
    leaving a lightly damped exciter/stabilizer mode behind. Any failure to
    build or analyze the model scores -1.
    """
    if scope not in FITNESS_SCOPES:
        raise ConfigError(f"fitness scope must be one of {FITNESS_SCOPES}, got {scope!r}")

    def fitness(x) -> float:
        try:
            ms = analyze(build_closed_loop_for(system, PssParams.from_vector(x, T_w), op))
        except (ValueError, np.linalg.LinAlgError):
            return -1.0
        j = objective_from_modes(ms)
        worst = [m.zeta for m in ms.modes if m.sigma >= 0 or (scope == "all" and m.is_complex)]
        if worst:
            j = min(j, min(worst))
        return j if math.isfinite(j) else -1.0

    return fitness
