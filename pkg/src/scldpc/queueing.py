"""Encoder queue accounting and queue-minimizing interleaver search.

Encoding proceeds position by position; a position sending fraction
beta_z of its n bits over the first channel leaves n(2 beta_z - 1) bits
imbalanced, so the queue after position z is the prefix sum
Q(z) = n sum_{i<=z} (2 beta_i - 1) and the required buffer is max|Q(z)|.
Decodability is rotation-invariant while Q is not, so searches score each
candidate at its best circular rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .debec import DEFAULT_DELTA, DEFAULT_MAX_ITERS, decodes, run_de
from .devo import DevoConfig, evolve
from .ensemble import (
    EnsembleParams,
    InterleavingPattern,
    effective_profile_interleaving,
)
from .errors import InfeasibleError
from .parallel import UniformInterleaving, beta_from_uniform, is_achievable

BALANCE_TOL = 1e-9


@dataclass(frozen=True)
class QueueTrace:
    """Per-position queue lengths Q(z) in bits and their maximum |Q|."""

    per_position: tuple[float, ...]
    max_abs: float
    n: int


def queue_trace(pattern: InterleavingPattern, n: int) -> QueueTrace:
    """Prefix-sum queue trace of a balanced interleaving pattern."""
    if n < 1:
        raise ValueError("n must be positive")
    q = n * np.cumsum(2.0 * pattern.as_array() - 1.0)
    if abs(q[-1]) > n * 1e-6:
        raise ValueError(f"balanced pattern must telescope to zero, got Q(L-1)={q[-1]}")
    return QueueTrace(tuple(float(v) for v in q), float(np.max(np.abs(q))), n)


def _rotated_max_queue(beta: np.ndarray) -> tuple[float, int]:
    """Minimal max|Q|/n over circular rotations and the achieving rotation.

    Starting the walk at rotation r rebases the cumulative sum by W(r-1),
    so the best achievable peak is governed by the walk value closest to
    the midpoint of its range.
    """
    walk = np.cumsum(2.0 * beta - 1.0)
    lo, hi = walk.min(), walk.max()
    peaks = np.maximum(hi - walk, walk - lo)
    r = int(np.argmin(peaks))
    return float(peaks[r]), (r + 1) % beta.size


def _rotate(beta: np.ndarray, r: int) -> np.ndarray:
    return np.roll(beta, -r)


def project_balance(beta: np.ndarray, target: float | None = None) -> np.ndarray:
    """Project onto the balance hyperplane sum(beta) = L/2 within [0, 1]^L.

    Repeated mean-shift and clip; the residual is finally spread exactly
    over the coordinates with room to move.
    """
    beta = np.clip(np.asarray(beta, dtype=float), 0.0, 1.0)
    if target is None:
        target = beta.size / 2.0
    for _ in range(100):
        r = beta.sum() - target
        if abs(r) <= BALANCE_TOL:
            return beta
        movable = (beta > 0.0) if r > 0 else (beta < 1.0)
        count = int(np.count_nonzero(movable))
        if count == 0:
            break
        beta[movable] -= r / count
        beta = np.clip(beta, 0.0, 1.0)
    r = beta.sum() - target
    if abs(r) > BALANCE_TOL:
        raise ValueError("balance projection failed to converge")
    return beta


def _decodes_beta(params, eps1, eps2, beta, delta, max_iters):
    profile = effective_profile_interleaving(eps1, eps2, InterleavingPattern(beta))
    return decodes(params, profile, delta, max_iters)


def _uniform_candidates(params, eps1, eps2, beta0_tol, delta, max_iters):
    """Per-B minimal-|Q| feasible two-level patterns.

    At fixed B a coarse scan locates a feasible beta0 and bisection pulls
    it toward 1/2 (smaller deviation means smaller queue), relying on the
    feasible beta0 set being an interval.
    """
    L = params.L
    found = []
    for B in range(1, L):
        def tail(b0):
            return (L / 2.0 - B * b0) / (L - B)

        def valid(b0):
            return 0.0 <= tail(b0) <= 1.0

        def feasible(b0):
            beta = np.full(L, tail(b0))
            beta[:B] = b0
            return _decodes_beta(params, eps1, eps2, beta, delta, max_iters)

        probe = None
        for b0 in np.arange(0.5, 1.0 + 1e-12, 0.05):
            if valid(b0) and feasible(b0):
                probe = float(b0)
                break
        if probe is None:
            continue
        lo, hi = 0.5, probe
        while hi - lo > beta0_tol:
            mid = 0.5 * (lo + hi)
            if valid(mid) and feasible(mid):
                hi = mid
            else:
                lo = mid
        beta = np.full(L, tail(hi))
        beta[:B] = hi
        found.append(beta)
    return found


def minimize_queue(
    params: EnsembleParams,
    eps1: float,
    eps2: float,
    config: DevoConfig | None = None,
    mode: str = "uniform",
    n: int | None = None,
    beta0_tol: float = 1e-3,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> tuple[InterleavingPattern, QueueTrace]:
    """Decodable interleaving pattern with the smallest encoder queue.

    uniform mode sweeps two-level patterns (B, beta0); nonuniform mode
    runs differential evolution over balanced beta vectors warm-started
    from the uniform optimum.  Both score candidates at their best
    circular rotation and return the rotated pattern.
    """
    if eps1 > eps2:
        raise ValueError("canonical order requires eps1 <= eps2")
    if mode not in ("uniform", "nonuniform"):
        raise ValueError(f"unknown mode {mode!r}")
    if n is None:
        n = params.n if params.n is not None else 1
    if not is_achievable(params, eps1, eps2, delta=delta, max_iters=max_iters):
        raise InfeasibleError(f"({eps1}, {eps2}) is outside the BP-achievable region")

    candidates = _uniform_candidates(params, eps1, eps2, beta0_tol, delta, max_iters)
    if not candidates:
        raise InfeasibleError(f"no uniform pattern decodes ({eps1}, {eps2})")
    best_beta, best_q = None, np.inf
    for beta in candidates:
        q, _ = _rotated_max_queue(beta)
        if q < best_q:
            best_beta, best_q = beta, q

    if mode == "nonuniform":
        if config is None:
            config = DevoConfig(population_size=40)

        def fitness(beta, bar):
            q, _ = _rotated_max_queue(beta)
            if q >= bar:
                return None  # even a decodable candidate cannot improve
            profile = effective_profile_interleaving(eps1, eps2, InterleavingPattern(beta))
            result = run_de(params, profile, delta, max_iters)
            if result.converged:
                return q
            return params.L + result.final_pe

        best, cost = evolve(
            params.L,
            fitness,
            config,
            project=project_balance,
            init=[best_beta, _rotate(best_beta, _rotated_max_queue(best_beta)[1])],
        )
        if cost < params.L:
            best_beta = best

    _, r = _rotated_max_queue(best_beta)
    rotated = _rotate(best_beta, r)
    pattern = InterleavingPattern(rotated)
    return pattern, queue_trace(pattern, n)
