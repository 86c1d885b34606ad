"""Quantized density evolution over general BMS channels, and BICM thresholds.

The coupled recursion mirrors the scalar BEC one with densities in place
of erasure probabilities: check inputs are the uniform window mixture of
variable-to-check densities, check outputs the (d_c-1)-fold box-plus,
variable outputs the channel density convolved with the (d_v-1)-fold
self-convolution of the mixed check outputs.  A run decodes when the
mean a-posteriori error probability falls below pe_target within the
iteration cap (the cap is part of the decodability predicate).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .debec import DeResult
from .devo import DevoConfig
from .ensemble import EnsembleParams, InterleavingPattern, ShorteningPattern
from .errors import GridMismatchError, InfeasibleError
from .llr import (
    BicmChannelPair,
    LlrDensity,
    LlrGrid,
    ask4_bicm_densities,
    combine_bins,
    convolve_bins,
    make_grid,
    mix,
)

try:
    import numba

    numba.config.THREADING_LAYER = "workqueue"
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

DEFAULT_PE_TARGET = 1e-8
DEFAULT_BMS_ITERS = 1000
# Abort a run early when P_e has stagnated far above target: no relative
# progress beyond _STALL_RTOL over _STALL_WINDOW iterations while P_e still
# exceeds 1e4 * pe_target.  A viable decoding wave moves at least one
# position per ~window iterations, which changes P_e by ~1/L relative.
_STALL_WINDOW = 60
_STALL_RTOL = 1e-4


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _combine_pair(acc, acc_inf, b, b_inf, table):
        K = acc.shape[0]
        nxt = np.zeros(K)
        for i in range(K):
            ai = acc[i]
            if ai != 0.0:
                row = table[i]
                for j in range(K):
                    nxt[row[j]] += ai * b[j]
        if acc_inf != 0.0:
            for j in range(K):
                nxt[j] += acc_inf * b[j]
        if b_inf != 0.0:
            for i in range(K):
                nxt[i] += b_inf * acc[i]
        return nxt, acc_inf * b_inf

    @numba.njit(parallel=True, cache=True)
    def _cn_fold(bins, infm, table, reps):
        L = bins.shape[0]
        out = np.empty_like(bins)
        out_inf = np.empty_like(infm)
        for z in numba.prange(L):
            acc = bins[z].copy()
            acc_inf = infm[z]
            for _ in range(reps - 1):
                acc, acc_inf = _combine_pair(acc, acc_inf, bins[z], infm[z], table)
            out[z] = acc
            out_inf[z] = acc_inf
        return out, out_inf


def _cn_fold_numpy(bins, infm, grid, reps):
    out = np.empty_like(bins)
    out_inf = np.empty_like(infm)
    for z in range(bins.shape[0]):
        acc, acc_inf = bins[z], infm[z]
        for _ in range(reps - 1):
            acc = combine_bins(acc, acc_inf, bins[z], infm[z], grid)
            acc_inf = acc_inf * infm[z]
        out[z] = acc
        out_inf[z] = acc_inf
    return out, out_inf


def _window_mix(bins, infm, w, sign):
    ob = np.zeros_like(bins)
    oi = np.zeros_like(infm)
    for j in range(w):
        ob += np.roll(bins, sign * j, axis=0)
        oi += np.roll(infm, sign * j)
    return ob / w, oi / w


def run_de_bms(
    params: EnsembleParams,
    channels: Sequence[LlrDensity],
    pe_target: float = DEFAULT_PE_TARGET,
    max_iters: int = DEFAULT_BMS_ITERS,
    stall_exit: bool = False,
    record_erasure_history: bool = False,
) -> DeResult | tuple[DeResult, np.ndarray]:
    """Coupled quantized DE; converged when mean P_e < pe_target in time.

    final_x holds the per-position a-posteriori error probabilities at the
    stopping point.  With record_erasure_history the (T, L) array of
    per-iteration variable-to-check erasure masses is returned as well
    (the trajectory matched by the scalar BEC recursion under the
    erasure-density embedding).  stall_exit aborts runs whose P_e has
    clearly frozen at a fixed point far above the target.
    """
    if len(channels) != params.L:
        raise ValueError(f"need one channel density per position, got {len(channels)}")
    grid = channels[0].grid
    for d in channels:
        if d.grid != grid:
            raise GridMismatchError("channel densities on mixed grids")
    L, K, w = params.L, grid.levels, params.w
    chan_bins = np.stack([d.bins for d in channels])
    chan_inf = np.array([d.inf_mass for d in channels])
    table = grid.boxplus_table

    vc = np.zeros((L, K))
    vc[:, grid.zero_index] = 1.0
    vinf = np.zeros(L)
    history = []
    pe_trace = []
    pes = np.ones(L)
    pe = 1.0
    t = 0
    for t in range(1, max_iters + 1):
        a_bins, a_inf = _window_mix(vc, vinf, w, +1)
        if _HAVE_NUMBA:
            cv_bins, cv_inf = _cn_fold(a_bins, a_inf, table, params.d_c - 1)
        else:
            cv_bins, cv_inf = _cn_fold_numpy(a_bins, a_inf, grid, params.d_c - 1)
        b_bins, b_inf = _window_mix(cv_bins, cv_inf, w, -1)
        for z in range(L):
            acc = b_bins[z]
            acc_inf = b_inf[z]
            for _ in range(params.d_v - 2):
                acc = convolve_bins(acc, b_bins[z], grid)
                acc_inf = acc_inf + b_inf[z] - acc_inf * b_inf[z]
            nb = convolve_bins(chan_bins[z], acc, grid)
            ninf = chan_inf[z] + acc_inf - chan_inf[z] * acc_inf
            total = nb.sum() + ninf
            vc[z] = nb / total
            vinf[z] = ninf / total
            ab = convolve_bins(vc[z], b_bins[z], grid)
            ab_inf = vinf[z] + b_inf[z] - vinf[z] * b_inf[z]
            ab_total = ab.sum() + ab_inf
            pes[z] = (ab[: grid.zero_index].sum() + 0.5 * ab[grid.zero_index]) / ab_total
        if record_erasure_history:
            history.append(vc[:, grid.zero_index].copy())
        pe = float(pes.mean())
        if pe < pe_target:
            result = DeResult(True, t, pe, tuple(pes), False)
            return (result, np.array(history)) if record_erasure_history else result
        if stall_exit:
            pe_trace.append(pe)
            if (
                len(pe_trace) > _STALL_WINDOW
                and pe > 1e4 * pe_target
                and pe_trace[-1 - _STALL_WINDOW] - pe < _STALL_RTOL * pe_trace[-1 - _STALL_WINDOW]
            ):
                break
    result = DeResult(False, t, pe, tuple(pes), t >= max_iters)
    return (result, np.array(history)) if record_erasure_history else result


def bicm_channels_for_pattern(
    pair: BicmChannelPair,
    pattern: InterleavingPattern,
    shortening: ShorteningPattern | None = None,
) -> list[LlrDensity]:
    """Per-position channel densities for an interleaving pattern.

    Position z sees the beta_z mixture of the two bit channels; a
    shortened fraction contributes known-bit (+infinity) mass instead.
    """
    from .llr import known_bit_density

    known = known_bit_density(pair.density1.grid)
    channels = []
    alphas = shortening.as_array() if shortening is not None else np.zeros(len(pattern))
    for beta_z, alpha_z in zip(pattern.beta, alphas):
        chan = mix(pair.density1, pair.density2, beta_z)
        if alpha_z > 0.0:
            chan = mix(known, chan, alpha_z)
        channels.append(chan)
    return channels


def half_pattern(L: int) -> InterleavingPattern:
    return InterleavingPattern(np.full(L, 0.5))


def bicm_decodes(
    params: EnsembleParams,
    snr_db: float,
    pattern: InterleavingPattern,
    grid: LlrGrid,
    shortening: ShorteningPattern | None = None,
    pe_target: float = DEFAULT_PE_TARGET,
    max_iters: int = DEFAULT_BMS_ITERS,
    stall_exit: bool = True,
) -> bool:
    pair = ask4_bicm_densities(snr_db, grid)
    channels = bicm_channels_for_pattern(pair, pattern, shortening)
    return run_de_bms(params, channels, pe_target, max_iters, stall_exit).converged


def bicm_threshold(
    params: EnsembleParams,
    pattern: InterleavingPattern | None = None,
    tol_db: float = 0.02,
    grid: LlrGrid | None = None,
    shortening: ShorteningPattern | None = None,
    bracket_db: tuple[float, float] = (1.5, 6.0),
    pe_target: float = DEFAULT_PE_TARGET,
    max_iters: int = DEFAULT_BMS_ITERS,
) -> float:
    """Smallest decodable Es/N0 (dB, within tol_db) for the interleaving."""
    if grid is None:
        grid = make_grid()
    if pattern is None:
        pattern = half_pattern(params.L)
    lo, hi = bracket_db
    while not bicm_decodes(params, hi, pattern, grid, shortening, pe_target, max_iters):
        lo, hi = hi, hi + 3.0
        if hi > 15.0:
            raise InfeasibleError("no decodable SNR below 15 dB")
    while lo > 0.0 and bicm_decodes(params, lo, pattern, grid, shortening, pe_target, max_iters):
        hi, lo = lo, max(0.0, lo - 2.0)
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if bicm_decodes(params, mid, pattern, grid, shortening, pe_target, max_iters):
            hi = mid
        else:
            lo = mid
    return hi


def ebn0_db(snr_db: float, rate: float, bits_per_symbol: int = 2) -> float:
    """Energy per information bit: Eb/N0 = Es/N0 / (rate * bits per symbol)."""
    return snr_db - 10.0 * np.log10(rate * bits_per_symbol)


@dataclass(frozen=True)
class BicmSearchResult:
    pattern: InterleavingPattern
    threshold_db: float
    ebn0_db: float
    evaluations: int


def _uniform_beta(L, B, beta0):
    tail = (L / 2.0 - B * beta0) / (L - B)
    if not 0.0 <= tail <= 1.0:
        return None
    beta = np.full(L, tail)
    beta[:B] = beta0
    return beta


def optimize_bicm_interleaver(
    params: EnsembleParams,
    config: DevoConfig | None = None,
    mode: str = "uniform",
    tol_db: float = 0.02,
    grid: LlrGrid | None = None,
    beta0_step: float = 0.05,
    pe_target: float = DEFAULT_PE_TARGET,
    max_iters: int = DEFAULT_BMS_ITERS,
) -> BicmSearchResult:
    """Interleaving pattern minimizing the BICM BP threshold.

    uniform mode sweeps two-level candidates (B, beta0), pruning each
    against the incumbent with a single probe just below it.  nonuniform
    mode continues with differential evolution on a descending SNR probe
    ladder seeded by the uniform optimum; the best pattern found overall
    is returned (the uniform optimum when evolution finds nothing better).
    """
    if grid is None:
        grid = make_grid()
    if mode not in ("uniform", "nonuniform"):
        raise ValueError(f"unknown mode {mode!r}")
    L = params.L
    evals = 0

    def decodes_at(eta, beta):
        nonlocal evals
        evals += 1
        return bicm_decodes(
            params, eta, InterleavingPattern(beta), grid, None, pe_target, max_iters
        )

    # no-interleaving baseline
    best_beta = np.full(L, 0.5)
    best_thr = bicm_threshold(params, half_pattern(L), tol_db, grid,
                              pe_target=pe_target, max_iters=max_iters)

    candidates = []
    for B in range(1, int(np.ceil(L / 2))):
        for beta0 in np.arange(1.0, 0.5 - 1e-12, -beta0_step):
            beta = _uniform_beta(L, B, float(beta0))
            if beta is not None:
                candidates.append((B, beta))
    # small seed blocks tend to win; visiting them first tightens the
    # incumbent early so later candidates die on the single pruning probe
    candidates.sort(key=lambda c: c[0])

    for _, beta in candidates:
        probe = best_thr - tol_db
        if probe <= 0 or not decodes_at(probe, beta):
            continue
        lo, hi = 0.0, probe
        while hi - lo > tol_db:
            mid = 0.5 * (lo + hi)
            if decodes_at(mid, beta):
                hi = mid
            else:
                lo = mid
        best_beta, best_thr = beta, hi

    if mode == "nonuniform":
        if config is None:
            config = DevoConfig(population_size=16, generations=6)
        rung_budget = max(1, config.generations)
        rng = np.random.default_rng(config.seed)
        from .devo import evolve
        from .queueing import project_balance

        probe = best_thr - tol_db
        improved = True
        while improved and probe > 0:
            improved = False
            found: list[np.ndarray] = []

            def fitness(beta, bar, _probe=probe, _found=found):
                nonlocal evals
                evals += 1
                pair = ask4_bicm_densities(_probe, grid)
                channels = bicm_channels_for_pattern(pair, InterleavingPattern(beta))
                result = run_de_bms(params, channels, pe_target, max_iters, stall_exit=True)
                if result.converged:
                    _found.append(beta.copy())
                return result.final_pe

            jitter = [
                project_balance(np.clip(best_beta + rng.normal(0.0, 0.05, L), 0.0, 1.0))
                for _ in range(config.population_size - 1)
            ]
            evolve(
                L,
                fitness,
                DevoConfig(
                    config.population_size,
                    config.mutation_factor,
                    config.crossover_rate,
                    rung_budget,
                    int(rng.integers(1 << 31)),
                ),
                project=project_balance,
                init=[best_beta] + jitter,
            )
            if found:
                best_beta = found[-1]
                best_thr = probe
                probe = best_thr - tol_db
                improved = True
        # exact threshold of the final pattern
        best_thr = bicm_threshold(
            params, InterleavingPattern(best_beta), tol_db, grid,
            bracket_db=(max(best_thr - 1.0, 0.1), best_thr + 0.5),
            pe_target=pe_target, max_iters=max_iters,
        )

    pattern = InterleavingPattern(best_beta)
    rate = 1.0 - params.d_v / params.d_c
    return BicmSearchResult(pattern, best_thr, ebn0_db(best_thr, rate), evals)
