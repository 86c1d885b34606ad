"""Shortening-pattern search maximizing design rate subject to decodability.

Three searches of increasing generality: a bisection over uniform
prefix patterns, an exhaustive scan of a quantized prefix grid, and
differential evolution over the prefix.  All use the same decodability
predicate: the density-evolution mean-change rule fires and the residual
bit erasure probability stays below delta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .debec import DEFAULT_DELTA, DEFAULT_MAX_ITERS, decodes, map_threshold, run_de
from .devo import DevoConfig, evolve
from .ensemble import (
    EnsembleParams,
    ShorteningPattern,
    design_rate,
    effective_profile_shortening,
)
from .errors import InfeasibleError


@dataclass(frozen=True)
class UniformShortening:
    """Prefix pattern: alpha on the first B positions, zero elsewhere."""

    B: int
    alpha: float

    def __post_init__(self):
        if self.B < 0:
            raise ValueError("B must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    def to_pattern(self, L: int, grid: float = 1e-3) -> ShorteningPattern:
        if not self.B < L:
            raise ValueError(f"B={self.B} must be smaller than L={L}")
        alpha = np.zeros(L)
        alpha[: self.B] = self.alpha
        return ShorteningPattern(alpha, grid=grid)


@dataclass(frozen=True)
class ShorteningSearchResult:
    pattern: ShorteningPattern
    rate: float
    feasible: bool
    evaluations: int


def _decodes_pattern(params, eps, pattern, delta, max_iters):
    return decodes(params, effective_profile_shortening(eps, pattern), delta, max_iters)


def _min_uniform_alpha(params, eps, B, alpha_tol, delta, max_iters):
    """Smallest decodable alpha for a fixed prefix length B, or None.

    BP performance is monotone in alpha, so plain bisection applies.
    """
    full = UniformShortening(B, 1.0).to_pattern(params.L)
    if not _decodes_pattern(params, eps, full, delta, max_iters):
        return None
    lo, hi = 0.0, 1.0
    if _decodes_pattern(params, eps, UniformShortening(B, 0.0).to_pattern(params.L), delta, max_iters):
        return 0.0
    while hi - lo > alpha_tol:
        mid = 0.5 * (lo + hi)
        if _decodes_pattern(params, eps, UniformShortening(B, mid).to_pattern(params.L), delta, max_iters):
            hi = mid
        else:
            lo = mid
    return hi


def optimize_uniform(
    params: EnsembleParams,
    eps: float,
    alpha_tol: float = 1e-4,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> tuple[UniformShortening, float]:
    """Best uniform prefix shortening (B, alpha) by design rate.

    For each B the smallest decodable alpha is found by bisection; the
    returned pair maximizes the design rate over B in [1, L).  Raises
    InfeasibleError for channels at or above the MAP threshold.
    """
    zero = ShorteningPattern(np.zeros(params.L))
    if _decodes_pattern(params, eps, zero, delta, max_iters):
        return UniformShortening(0, 0.0), design_rate(params, zero)
    if eps >= map_threshold(params):
        raise InfeasibleError(f"eps={eps} is not below the MAP threshold")
    best = None
    best_rate = -1.0
    for B in range(1, params.L):
        alpha = _min_uniform_alpha(params, eps, B, alpha_tol, delta, max_iters)
        if alpha is None:
            continue
        rate = design_rate(params, UniformShortening(B, alpha).to_pattern(params.L))
        if rate > best_rate:
            best, best_rate = UniformShortening(B, alpha), rate
    if best is None:
        raise InfeasibleError(f"no uniform pattern decodes at eps={eps}")
    return best, best_rate


def _prefix_rates(params, alphas):
    """Design rate of prefix-supported patterns, vectorized over candidates.

    Valid while support + w - 1 <= L, so the window sums never wrap.
    """
    support = alphas.shape[1]
    span = support + params.w - 1
    win = np.zeros((span, support))
    for z in range(span):
        for k in range(support):
            if 0 <= z - k < params.w:
                win[z, k] = 1.0 / params.w
    s = alphas @ win.T
    num = params.L - np.sum(s ** params.d_c, axis=1)
    denom = params.L - alphas.sum(axis=1)
    return 1.0 - (params.d_v / params.d_c) * num / denom


def _expand_prefix(params, prefix, grid=1e-3):
    alpha = np.zeros(params.L)
    alpha[: len(prefix)] = prefix
    return ShorteningPattern(alpha, grid=grid)


_MAX_GRID_CANDIDATES = 3_000_000


def optimize_exhaustive(
    params: EnsembleParams,
    eps: float,
    grid: float = 1e-2,
    support: int | None = None,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> ShorteningPattern:
    """Highest-rate decodable pattern on the quantized prefix grid.

    Nonzero entries are restricted to the first `support` positions
    (rotation symmetry makes the location arbitrary).  Candidates are
    visited in decreasing rate order (ties lexicographically), pruning
    grid points dominated by an already-failed candidate, so the first
    decodable candidate is the optimum.
    """
    if support is None:
        support = 2 * params.w - 1
    if not 0 < support <= params.L - params.w + 1:
        raise ValueError("support must leave room for the window sums")
    levels = int(round(1.0 / grid)) + 1
    if levels ** support > _MAX_GRID_CANDIDATES:
        raise ValueError(
            f"grid enumeration of {levels}^{support} candidates is intractable; "
            "coarsen the grid or shrink the support"
        )
    values = np.linspace(0.0, 1.0, levels)
    grids = np.meshgrid(*([values] * support), indexing="ij")
    alphas = np.stack([g.ravel() for g in grids], axis=1)
    rates = _prefix_rates(params, alphas)

    # Known-feasible grid candidate (uniform prefix rounded up) bounds the
    # search from below: anything with a lower rate can be skipped.
    floor_rate = -np.inf
    floor_prefix = None
    alpha_u = _min_uniform_alpha(params, eps, support, grid / 4.0, delta, max_iters)
    if alpha_u is not None:
        rounded = min(1.0, np.ceil(alpha_u / grid - 1e-12) * grid)
        floor_prefix = np.full(support, rounded)
        if _decodes_pattern(params, eps, _expand_prefix(params, floor_prefix, grid), delta, max_iters):
            floor_rate = _prefix_rates(params, floor_prefix[None, :])[0]
        else:
            floor_prefix = None

    keep = rates > floor_rate
    alphas, rates = alphas[keep], rates[keep]
    order = np.lexsort(tuple(alphas.T[::-1]) + (-rates,))
    alphas, rates = alphas[order], rates[order]

    failed: list[np.ndarray] = []
    for cand, rate in zip(alphas, rates):
        if any(np.all(cand <= f) for f in failed):
            continue
        if _decodes_pattern(params, eps, _expand_prefix(params, cand, grid), delta, max_iters):
            return _expand_prefix(params, cand, grid)
        failed.append(cand)
    if floor_prefix is not None:
        return _expand_prefix(params, floor_prefix, grid)
    raise InfeasibleError(f"no grid pattern decodes at eps={eps}")


def optimize_devo(
    params: EnsembleParams,
    eps: float,
    config: DevoConfig | None = None,
    support: int | None = None,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> ShorteningSearchResult:
    """Differential evolution over prefix-supported patterns.

    Fitness maximizes design rate among decodable candidates; candidates
    that fail to decode are ranked by their residual erasure probability
    to give the population a gradient toward feasibility.  Deterministic
    for a fixed config.seed.
    """
    if support is None:
        support = 2 * params.w - 1
    if support > params.L:
        raise ValueError("support cannot exceed L")
    if config is None:
        config = DevoConfig(population_size=10 * support)
    evals = 0

    def fitness(prefix, bar):
        nonlocal evals
        rate = _prefix_rates(params, prefix[None, :])[0]
        if -rate >= bar:
            return None  # cannot beat the incumbent even if decodable
        evals += 1
        result = run_de(params, effective_profile_shortening(eps, _expand_prefix(params, prefix)),
                        delta, max_iters)
        if result.converged:
            return -rate
        return result.final_pe

    best_prefix, best_cost = evolve(support, fitness, config)
    pattern = _expand_prefix(params, best_prefix)
    feasible = best_cost < 0.0
    rate = design_rate(params, pattern)
    return ShorteningSearchResult(pattern, rate, feasible, evals)


def universal_pattern(
    params: EnsembleParams,
    margin: float = 1e-3,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> ShorteningPattern:
    """Pattern optimized at the MAP threshold (minus a margin).

    Density evolution is monotone in the channel, so this single pattern
    decodes for every eps up to map_threshold - margin.
    """
    eps = map_threshold(params) - margin
    best, _ = optimize_uniform(params, eps, delta=delta, max_iters=max_iters)
    return best.to_pattern(params.L)
