"""Finite-length code sampling, BEC/AWGN decoding, and BER sweeps.

Instances are sampled from the tail-biting ensemble by socket matching:
each position holds n*d_v variable sockets split (near-)evenly across the
w coupling offsets and matched by random permutation to check sockets at
the offset target position.  Decoders work on flat edge arrays grouped
into (M, d_c) / (N, d_v) index matrices, which the regular degrees make
exact.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ensemble import (
    EnsembleParams,
    InterleavingPattern,
    ShorteningPattern,
    terminated_pattern,
)

_LLR_CLIP = 30.0


@dataclass(frozen=True)
class CodeInstance:
    """A sampled Tanner graph with shortening and channel assignments."""

    params: EnsembleParams
    edge_var: np.ndarray  # (E,) variable node of each edge
    edge_chk: np.ndarray  # (E,) check node of each edge
    shortened: np.ndarray  # (N,) bool, bits fixed to zero
    channel1: np.ndarray  # (N,) bool, bits assigned to the first channel
    parallel_edges: int
    seed: int

    @property
    def n_vars(self) -> int:
        return self.params.N

    @property
    def n_checks(self) -> int:
        return self.params.M

    @property
    def var_edges(self) -> np.ndarray:
        """(N, d_v) edge indices grouped per variable."""
        return np.argsort(self.edge_var, kind="stable").reshape(
            self.n_vars, self.params.d_v
        )

    @property
    def chk_edges(self) -> np.ndarray:
        """(M, d_c) edge indices grouped per check."""
        return np.argsort(self.edge_chk, kind="stable").reshape(
            self.n_checks, self.params.d_c
        )

    def var_positions(self) -> np.ndarray:
        return np.arange(self.n_vars) // self.params.n


def _offset_counts(params: EnsembleParams) -> np.ndarray:
    """Sockets per coupling offset; remainders round-robin by offset index."""
    total = params.n * params.d_v
    base, rem = divmod(total, params.w)
    counts = np.full(params.w, base, dtype=np.int64)
    counts[:rem] += 1
    return counts


def sample_code(
    params: EnsembleParams,
    seed: int,
    shortening: ShorteningPattern | None = None,
    interleaving: InterleavingPattern | None = None,
) -> CodeInstance:
    """Sample a random ensemble instance, deterministically from the seed.

    Shortened bits (round(alpha_z * n) per position) and channel-1 bits
    (round(beta_z * n), balanced globally by largest remainder) are chosen
    uniformly within each position.  Parallel edges are kept and counted.
    """
    if params.n is None:
        raise ValueError("finite-length sampling requires n")
    rng = np.random.default_rng(seed)
    L, n, m, w = params.L, params.n, params.m, params.w
    d_v, d_c = params.d_v, params.d_c
    counts = _offset_counts(params)
    bounds = np.concatenate(([0], np.cumsum(counts)))

    # per position: permuted flat socket owners, sliced per offset
    var_slices = []
    chk_slices = []
    for z in range(L):
        vs = rng.permutation(np.repeat(np.arange(z * n, (z + 1) * n), d_v))
        cs = rng.permutation(np.repeat(np.arange(z * m, (z + 1) * m), d_c))
        var_slices.append([vs[bounds[i] : bounds[i + 1]] for i in range(w)])
        chk_slices.append([cs[bounds[i] : bounds[i + 1]] for i in range(w)])

    edge_var = []
    edge_chk = []
    for z in range(L):
        for i in range(w):
            vs = var_slices[z][i]
            cs = chk_slices[(z + i) % L][i]
            edge_var.append(vs)
            edge_chk.append(cs[rng.permutation(len(cs))])
    edge_var = np.concatenate(edge_var)
    edge_chk = np.concatenate(edge_chk)
    pair_ids = edge_var.astype(np.int64) * (L * m) + edge_chk
    parallel = int(len(pair_ids) - len(np.unique(pair_ids)))

    shortened = np.zeros(L * n, dtype=bool)
    if shortening is not None:
        for z, alpha in enumerate(shortening.alpha):
            k = int(round(alpha * n))
            if k:
                shortened[z * n + rng.choice(n, size=k, replace=False)] = True

    channel1 = np.zeros(L * n, dtype=bool)
    if interleaving is not None:
        beta = np.asarray(interleaving.beta)
        k_z = _balanced_counts(beta, n)
        for z in range(L):
            if k_z[z]:
                channel1[z * n + rng.choice(n, size=k_z[z], replace=False)] = True

    return CodeInstance(params, edge_var, edge_chk, shortened, channel1, parallel, seed)


def _balanced_counts(beta: np.ndarray, n: int) -> np.ndarray:
    """round(beta_z * n) adjusted by largest remainder to sum to L*n/2."""
    raw = beta * n
    counts = np.floor(raw).astype(np.int64)
    target = int(round(raw.sum()))
    remainders = raw - counts
    short = target - counts.sum()
    if short > 0:
        take = np.argsort(-remainders, kind="stable")[:short]
        counts[take] += 1
    return counts


def encode_zero_codeword(instance: CodeInstance) -> np.ndarray:
    """The all-zero codeword (valid for any parity-check set)."""
    return np.zeros(instance.n_vars, dtype=np.int8)


def decode_bec_peeling(
    instance: CodeInstance, erasure_mask: np.ndarray, max_iters: int = 10_000
) -> tuple[np.ndarray, int]:
    """Peeling decoder: repeatedly resolve checks with one erased neighbor.

    Shortened bits must not be erased.  Returns the resolved mask (True
    where the bit is known after decoding) and the residual erasure count.
    """
    erased = np.array(erasure_mask, dtype=bool)
    if np.any(erased & instance.shortened):
        raise ValueError("shortened bits are known and cannot be erased")
    chk_vars = instance.edge_var[instance.chk_edges]  # (M, d_c)
    for _ in range(max_iters):
        er = erased[chk_vars]
        rows = np.flatnonzero(er.sum(axis=1) == 1)
        if rows.size == 0:
            break
        resolved = chk_vars[rows, np.argmax(er[rows], axis=1)]
        if not np.any(erased[resolved]):
            break
        erased[resolved] = False
    return ~erased, int(erased.sum())


def decode_bec_bp(
    instance: CodeInstance, erasure_mask: np.ndarray, max_iters: int = 10_000
) -> tuple[np.ndarray, int]:
    """Flooding erasure BP; its fixed point matches the peeling decoder."""
    known_ch = ~np.array(erasure_mask, dtype=bool)
    chk_e = instance.chk_edges
    var_e = instance.var_edges
    v2c = known_ch[instance.edge_var]
    c2v = np.zeros(len(v2c), dtype=bool)
    known = known_ch.copy()
    for _ in range(max_iters):
        kn = v2c[chk_e]
        # check output known iff every other incoming message is known
        c2v[chk_e] = kn.sum(axis=1, keepdims=True) - kn >= instance.params.d_c - 1
        incoming = c2v[var_e]
        new_known = known_ch | incoming.any(axis=1)
        v2c[var_e] = known_ch[:, None] | (
            incoming.sum(axis=1, keepdims=True) - incoming > 0
        )
        if np.array_equal(new_known, known):
            break
        known = new_known
    return known, int((~known).sum())


def decode_awgn_spa(
    instance: CodeInstance, llrs: np.ndarray, max_iters: int = 200
) -> tuple[np.ndarray, int]:
    """Flooding sum-product decoding against the all-zero codeword.

    Stops as soon as the hard decisions satisfy every parity check.
    Returns (hard decisions, bit error count); LLRs clip at +-30.
    """
    llrs = np.clip(np.asarray(llrs, dtype=float), -_LLR_CLIP, _LLR_CLIP)
    chk_e = instance.chk_edges
    var_e = instance.var_edges
    chk_vars = instance.edge_var[chk_e]
    v2c = llrs[instance.edge_var].copy()
    c2v = np.zeros_like(v2c)
    hard = llrs < 0.0
    for _ in range(max_iters):
        if not np.any(hard[chk_vars].sum(axis=1) % 2):
            break
        t = np.tanh(0.5 * v2c[chk_e])
        nz = t != 0.0
        prod = np.prod(np.where(nz, t, 1.0), axis=1, keepdims=True)
        zero_count = (~nz).sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            loo = np.where(
                zero_count == 0,
                prod / t,
                np.where((zero_count == 1) & ~nz, prod, 0.0),
            )
        loo = np.clip(loo, -1.0 + 1e-15, 1.0 - 1e-15)
        c2v[chk_e] = np.clip(2.0 * np.arctanh(loo), -_LLR_CLIP, _LLR_CLIP)
        total = llrs + c2v[var_e].sum(axis=1)
        v2c[var_e] = np.clip(total[:, None] - c2v[var_e], -_LLR_CLIP, _LLR_CLIP)
        hard = total < 0.0
    return hard, int(hard.sum())


@dataclass(frozen=True)
class BerPoint:
    channel_param: float
    ber: float
    ci_low: float
    ci_high: float
    trials: int
    scenario: str


def wilson_interval(errors: int, total: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if total == 0:
        return 0.0, 1.0
    p = errors / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (p + z2 / (2.0 * total)) / denom
    half = z * math.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _scenario_patterns(params, scenario, pattern):
    shortening = None
    interleaving = None
    if scenario == "terminated":
        shortening = terminated_pattern(params)
    elif scenario == "shortened":
        if pattern is None:
            raise ValueError("shortened scenario needs a ShorteningPattern")
        shortening = pattern
    elif scenario == "bicm":
        if pattern is None:
            interleaving = InterleavingPattern(np.full(params.L, 0.5))
        else:
            interleaving = pattern
    elif scenario != "tailbiting":
        raise ValueError(f"unknown scenario {scenario!r}")
    return shortening, interleaving


_ASK4_POINTS = np.array([-3.0, -1.0, 1.0, 3.0]) / math.sqrt(5.0)
# symbol index by label bits (b1, b2): Gray 00,01,11,10 -> -3,-1,+1,+3
_ASK4_SYMBOL = np.array([[0, 1], [3, 2]])


def _trial_bec(instance, eps, rng):
    erasable = ~instance.shortened
    erased = erasable & (rng.random(instance.n_vars) < eps)
    _, residual = decode_bec_peeling(instance, erased)
    return residual, int(erasable.sum())


def _trial_bawgn(instance, snr_db, rng):
    sigma = math.sqrt(1.0 / (2.0 * 10.0 ** (snr_db / 10.0)))
    y = 1.0 + sigma * rng.standard_normal(instance.n_vars)
    llr = 2.0 * y / (sigma * sigma)
    llr[instance.shortened] = _LLR_CLIP
    hard, _ = decode_awgn_spa(instance, llr)
    counted = ~instance.shortened
    return int(np.count_nonzero(hard & counted)), int(counted.sum())


def _trial_ask4(instance, snr_db, rng):
    """BICM trial: pair channel-1 and channel-2 bits in encoding order.

    The all-zero codeword is scrambled per bit (channel adaptation), the
    pair maps through the Gray 4-ASK labeling, and bit-metric LLRs are
    de-scrambled back before decoding.
    """
    sigma2 = 1.0 / (2.0 * 10.0 ** (snr_db / 10.0))
    sigma = math.sqrt(sigma2)
    idx1 = np.flatnonzero(instance.channel1)
    idx2 = np.flatnonzero(~instance.channel1)
    if len(idx1) != len(idx2):
        raise ValueError("channel assignment must split the bits evenly")
    scramble = rng.integers(0, 2, size=instance.n_vars)
    b1 = scramble[idx1]
    b2 = scramble[idx2]
    x = _ASK4_POINTS[_ASK4_SYMBOL[b1, b2]]
    y = x + sigma * rng.standard_normal(len(x))
    metrics = -((y[:, None] - _ASK4_POINTS[None, :]) ** 2) / (2.0 * sigma2)
    mx = metrics.max(axis=1, keepdims=True)
    e = np.exp(metrics - mx)
    # Gray labels per symbol index: b1 = (0,0,1,1), b2 = (0,1,1,0)
    num1 = e[:, 0] + e[:, 1]
    den1 = e[:, 2] + e[:, 3]
    num2 = e[:, 0] + e[:, 3]
    den2 = e[:, 1] + e[:, 2]
    llr = np.empty(instance.n_vars)
    llr[idx1] = np.log(num1) - np.log(den1)
    llr[idx2] = np.log(num2) - np.log(den2)
    llr *= 1.0 - 2.0 * scramble  # de-scramble back to the all-zero codeword
    llr[instance.shortened] = _LLR_CLIP
    hard, _ = decode_awgn_spa(instance, np.clip(llr, -_LLR_CLIP, _LLR_CLIP))
    counted = ~instance.shortened
    return int(np.count_nonzero(hard & counted)), int(counted.sum())


def _run_trial(args):
    params, scenario, pattern, channel, value, seed = args
    shortening, interleaving = _scenario_patterns(params, scenario, pattern)
    rng = np.random.default_rng(seed)
    instance = sample_code(params, int(rng.integers(1 << 63)), shortening, interleaving)
    if channel == "bec":
        return _trial_bec(instance, value, rng)
    if channel == "bawgn":
        return _trial_bawgn(instance, value, rng)
    if channel == "ask4":
        return _trial_ask4(instance, value, rng)
    raise ValueError(f"unknown channel {channel!r}")


def ber_sweep(
    params: EnsembleParams,
    scenario: str,
    channel_grid,
    trials: int,
    seed: int,
    channel: str = "bec",
    pattern=None,
    jobs: int = 1,
) -> list[BerPoint]:
    """Monte-Carlo BER over a channel grid, with 95% Wilson intervals.

    Each trial samples a fresh instance from a per-trial seed split off
    the master seed; shortened positions are excluded from the bit count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    points = []
    grid = list(channel_grid)
    seeds = np.random.SeedSequence(seed).spawn(len(grid) * trials)
    for gi, value in enumerate(grid):
        tasks = [
            (params, scenario, pattern, channel, float(value), seeds[gi * trials + ti])
            for ti in range(trials)
        ]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(_run_trial, tasks))
        else:
            outcomes = [_run_trial(t) for t in tasks]
        errors = sum(o[0] for o in outcomes)
        total = sum(o[1] for o in outcomes)
        lo, hi = wilson_interval(errors, total)
        points.append(BerPoint(float(value), errors / total, lo, hi, trials, scenario))
    return points


def write_ber_csv(path, points: list[BerPoint], header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["channel_param", "ber", "ci_low", "ci_high", "trials", "scenario"])
        for p in points:
            writer.writerow(
                [repr(p.channel_param), repr(p.ber), repr(p.ci_low), repr(p.ci_high),
                 p.trials, p.scenario]
            )
