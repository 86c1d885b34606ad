"""Generic rand/1/bin differential evolution over a box-constrained vector.

All searches in this library (shortening patterns, queue-minimizing
interleavers, BICM interleavers) share this loop.  Fitness is minimized
and may be lazily skipped: the evaluator receives the parent's fitness
and may return None when the trial provably cannot beat it, which saves
the expensive decodability check for hopeless candidates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class DevoConfig:
    """Hyperparameters of the differential evolution search."""

    population_size: int
    mutation_factor: float = 0.7
    crossover_rate: float = 0.9
    generations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("rand/1 mutation needs a population of at least 4")
        if not 0.0 < self.mutation_factor <= 2.0:
            raise ValueError("mutation factor must lie in (0, 2]")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover rate must lie in [0, 1]")
        if self.generations < 1:
            raise ValueError("generations must be positive")


def evolve(
    dim: int,
    fitness: Callable[[np.ndarray, float], float | None],
    config: DevoConfig,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    init: Sequence[np.ndarray] = (),
) -> tuple[np.ndarray, float]:
    """Minimize fitness over [0, 1]^dim with rand/1/bin evolution.

    fitness(candidate, bar) must return the candidate's cost, or None to
    signal "not better than bar" without computing the exact cost.
    project maps raw vectors onto the feasible set (e.g. the balance
    constraint); init supplies candidates placed at the head of the
    initial population.  Deterministic for a fixed config.seed.
    """
    rng = np.random.default_rng(config.seed)
    npop = config.population_size
    pop = rng.random((npop, dim))
    for k, cand in enumerate(init):
        if k >= npop:
            break
        pop[k] = np.clip(np.asarray(cand, dtype=float), 0.0, 1.0)
    if project is not None:
        pop = np.array([project(p) for p in pop])
    cost = np.array([fitness(p, np.inf) for p in pop], dtype=float)

    f = config.mutation_factor
    cr = config.crossover_rate
    for _ in range(config.generations):
        for i in range(npop):
            r1, r2, r3 = _pick_distinct(rng, npop, i)
            mutant = np.clip(pop[r1] + f * (pop[r2] - pop[r3]), 0.0, 1.0)
            cross = rng.random(dim) < cr
            cross[rng.integers(dim)] = True
            trial = np.where(cross, mutant, pop[i])
            if project is not None:
                trial = project(trial)
            trial_cost = fitness(trial, cost[i])
            if trial_cost is not None and trial_cost < cost[i]:
                pop[i] = trial
                cost[i] = trial_cost
    best = int(np.argmin(cost))
    return pop[best].copy(), float(cost[best])


def _pick_distinct(rng, npop, i):
    picks = []
    while len(picks) < 3:
        r = int(rng.integers(npop))
        if r != i and r not in picks:
            picks.append(r)
    return picks
