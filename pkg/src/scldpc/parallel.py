"""Two parallel BECs: uniform interleaving analysis and the achievable region.

With two BECs (eps1 <= eps2) used equally often, a two-level interleaver
(beta0 on the first B positions, the balancing value on the rest) induces
a two-level erasure profile (mu1, mu2).  The frontier function f(mu2, B)
is the largest mu1 that still decodes; scanning (B, mu2) and mapping the
feasible triples back through the balance identity

    eps1 + eps2 = (2B/L) mu1 + 2 (1 - B/L) mu2

yields the BP-achievable region of channel pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .debec import DEFAULT_DELTA, DEFAULT_MAX_ITERS, bp_threshold_uniform, decodes, map_threshold
from .ensemble import EnsembleParams, ErasureProfile, InterleavingPattern


@dataclass(frozen=True)
class TwoBecPoint:
    """A channel pair in canonical order eps1 <= eps2."""

    eps1: float
    eps2: float

    def __post_init__(self):
        for name, v in (("eps1", self.eps1), ("eps2", self.eps2)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.eps1 > self.eps2:
            raise ValueError("canonical order requires eps1 <= eps2")


@dataclass(frozen=True)
class UniformInterleaving:
    """Two-level interleaver: beta0 on z < B, the balancing tail value after."""

    L: int
    B: int
    beta0: float

    def __post_init__(self):
        if not 0 < self.B < self.L / 2:
            raise ValueError(f"B must satisfy 0 < B < L/2, got B={self.B}, L={self.L}")
        if not 0.0 <= self.beta0 <= 1.0:
            raise ValueError("beta0 must lie in [0, 1]")
        tail = self.beta_tail
        if not 0.0 <= tail <= 1.0:
            raise ValueError(f"tail beta {tail:.4f} falls outside [0, 1]")

    @property
    def beta_tail(self) -> float:
        return (self.L / 2.0 - self.B * self.beta0) / (self.L - self.B)

    def levels(self, eps1: float, eps2: float) -> tuple[float, float]:
        """Erasure levels (mu1, mu2) induced on head and tail positions."""
        mu1 = self.beta0 * eps1 + (1.0 - self.beta0) * eps2
        mu2 = self.beta_tail * eps1 + (1.0 - self.beta_tail) * eps2
        return mu1, mu2


def beta_from_uniform(params: EnsembleParams, u: UniformInterleaving) -> InterleavingPattern:
    """Expand (B, beta0) to the full length-L interleaving pattern."""
    if u.L != params.L:
        raise ValueError(f"interleaving built for L={u.L}, ensemble has L={params.L}")
    beta = np.full(params.L, u.beta_tail)
    beta[: u.B] = u.beta0
    return InterleavingPattern(beta)


def two_level_profile(params: EnsembleParams, mu1: float, mu2: float, B: int) -> ErasureProfile:
    eps = np.full(params.L, mu2)
    eps[:B] = mu1
    return ErasureProfile(eps)


def frontier_mu1(
    params: EnsembleParams,
    mu2: float,
    B: int,
    tol: float = 1e-4,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> float | None:
    """Largest mu1 in [0, mu2] for which the two-level profile decodes.

    Returns None when even a perfectly known head (mu1 = 0) cannot drive
    a decoding wave through the tail.
    """
    if not 0.0 <= mu2 <= 1.0:
        raise ValueError("mu2 must lie in [0, 1]")
    if not 0 < B < params.L / 2:
        raise ValueError(f"B must satisfy 0 < B < L/2, got {B}")
    if decodes(params, two_level_profile(params, mu2, mu2, B), delta, max_iters):
        return mu2
    if not decodes(params, two_level_profile(params, 0.0, mu2, B), delta, max_iters):
        return None
    lo, hi = 0.0, mu2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if decodes(params, two_level_profile(params, mid, mu2, B), delta, max_iters):
            lo = mid
        else:
            hi = mid
    return lo


def _frontier_triples(params, grid_step, tol, delta, max_iters, eps_bp, eps_map):
    """All feasible (B, mu2, f(mu2, B)) on the mu2 grid.

    mu2 points below the uniform BP threshold decode outright (f = mu2);
    above the MAP threshold no seed helps, so the scan stops early.
    f is non-increasing in mu2 at fixed B, which tightens each bisection
    bracket as mu2 ascends.
    """
    triples = []
    mu2_grid = np.arange(grid_step, min(1.0, eps_map + 2.0 * grid_step), grid_step)
    for B in range(1, int(np.ceil(params.L / 2))):
        f_prev = None
        for mu2 in mu2_grid:
            if mu2 < eps_bp - tol:
                triples.append((B, float(mu2), float(mu2)))
                f_prev = mu2
                continue
            hi0 = mu2 if f_prev is None else min(mu2, f_prev + tol)
            f = _frontier_bounded(params, mu2, B, hi0, tol, delta, max_iters)
            if f is None:
                break
            triples.append((B, float(mu2), float(f)))
            f_prev = f
    return triples


def _frontier_bounded(params, mu2, B, hi0, tol, delta, max_iters):
    if decodes(params, two_level_profile(params, hi0, mu2, B), delta, max_iters):
        lo, hi = hi0, hi0
    elif decodes(params, two_level_profile(params, 0.0, mu2, B), delta, max_iters):
        lo, hi = 0.0, hi0
    else:
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if decodes(params, two_level_profile(params, mid, mu2, B), delta, max_iters):
            lo = mid
        else:
            hi = mid
    return lo


def achievable_region(
    params: EnsembleParams,
    grid_step: float = 0.01,
    tol: float = 1e-4,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> list[TwoBecPoint]:
    """Frontier samples eps2(eps1) of the BP-achievable region.

    For each eps1 on the grid in [0, eps_BP], the best reachable eps2 is
    maximized over the feasible (B, mu2, f) triples subject to
    eps1 <= f(mu2, B).
    """
    if not 0.0 < grid_step <= 0.05:
        raise ValueError("grid_step must lie in (0, 0.05]")
    eps_bp = bp_threshold_uniform(params, tol=tol, delta=delta, max_iters=max_iters)
    eps_map = map_threshold(params)
    triples = _frontier_triples(params, grid_step, tol, delta, max_iters, eps_bp, eps_map)
    frontier = []
    for eps1 in np.arange(0.0, eps_bp, grid_step):
        best = eps1 if eps1 + eps1 < 2.0 * eps_bp else None
        for B, mu2, f in triples:
            if f < eps1:
                continue
            share = B / params.L
            eps2 = 2.0 * share * f + 2.0 * (1.0 - share) * mu2 - eps1
            if eps2 > 1.0:
                # shrink mu1 below f until eps2 = 1; realizable only if
                # that mu1 still dominates eps1
                low_end = 2.0 * share * eps1 + 2.0 * (1.0 - share) * mu2 - eps1
                eps2 = 1.0 if low_end <= 1.0 else None
            if eps2 is not None and eps2 >= eps1 and (best is None or eps2 > best):
                best = eps2
        if best is not None:
            frontier.append(TwoBecPoint(float(eps1), float(min(best, 1.0))))
    return frontier


def is_achievable(
    params: EnsembleParams,
    eps1: float,
    eps2: float,
    beta0_step: float = 0.05,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> bool:
    """Constructive membership test for a channel pair.

    Succeeds when some two-level interleaver decodes the pair; a coarse
    beta0 grid makes this slightly conservative near the frontier.
    """
    if eps1 > eps2:
        eps1, eps2 = eps2, eps1
    mean = 0.5 * (eps1 + eps2)
    if decodes(params, ErasureProfile(np.full(params.L, mean)), delta, max_iters):
        return True
    for B in range(1, int(np.ceil(params.L / 2))):
        for beta0 in np.arange(0.5, 1.0 + 1e-12, beta0_step):
            try:
                u = UniformInterleaving(params.L, B, float(beta0))
            except ValueError:
                continue
            mu1, mu2 = u.levels(eps1, eps2)
            if decodes(params, two_level_profile(params, mu1, mu2, B), delta, max_iters):
                return True
    return False
