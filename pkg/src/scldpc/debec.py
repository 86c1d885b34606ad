"""Scalar density evolution for tail-biting SC-LDPC ensembles over BECs.

The state is the vector x_z of erasure probabilities of variable-to-check
messages, one entry per spatial position.  One update reads

    x'_z = eps_z * (1 - (1/w) sum_i (1 - (1/w) sum_j x_{(z+i-j) mod L})^(d_c-1))^(d_v-1)

with both window sums over [0, w-1] and x initialized to all ones.  The
iteration stops at the first t where the mean absolute change drops below
delta; the run counts as decodable when the a-posteriori bit erasure
probability at that point is also below delta.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleParams, ErasureProfile, ShorteningPattern, effective_profile_shortening, terminated_pattern

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

DEFAULT_DELTA = 1e-7
DEFAULT_MAX_ITERS = 100_000
# x is provably non-increasing from x^(0)=1; allow a whisker for float noise.
_MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class DeResult:
    """Outcome of a density-evolution run.

    converged means both stopping conditions held: the mean-change rule
    fired within the iteration cap and the residual bit erasure
    probability final_pe fell below delta.  hit_iteration_cap flags runs
    that exhausted max_iters before the mean-change rule fired.
    """

    converged: bool
    iterations_used: int
    final_pe: float
    final_x: tuple[float, ...]
    hit_iteration_cap: bool = False


@dataclass(frozen=True)
class DeTrace:
    """Recorded snapshots x^(t) of a run, for wave-evolution plots."""

    snapshots: tuple[tuple[float, ...], ...]
    iterations: tuple[int, ...]
    stop_delta: float
    max_iters: int

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "z", "x"])
            for t, snap in zip(self.iterations, self.snapshots):
                for z, x in enumerate(snap):
                    writer.writerow([t, z, repr(x)])


def de_step(params: EnsembleParams, profile: ErasureProfile, x) -> np.ndarray:
    """One synchronous update of the coupled recursion."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.L,):
        raise ValueError(f"x must have length L={params.L}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("x entries must lie in [0, 1]")
    xn, _ = _step_arrays(profile.as_array(), x, params.d_v, params.d_c, params.w)
    return xn


def _step_arrays(eps, x, d_v, d_c, w):
    a = np.zeros_like(x)
    for j in range(w):
        a += np.roll(x, j)
    a /= w
    q = (1.0 - a) ** (d_c - 1)
    b = np.zeros_like(x)
    for i in range(w):
        b += np.roll(q, -i)
    b /= w
    erased = 1.0 - b
    return eps * erased ** (d_v - 1), eps * erased ** d_v


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _run_core(eps, d_v, d_c, w, delta, max_iters):
        L = eps.shape[0]
        x = np.ones(L)
        a = np.empty(L)
        q = np.empty(L)
        b = np.empty(L)
        stopped = False
        t = 0
        while t < max_iters:
            t += 1
            for z in range(L):
                s = 0.0
                for j in range(w):
                    s += x[(z - j) % L]
                a[z] = s / w
            for z in range(L):
                q[z] = (1.0 - a[z]) ** (d_c - 1)
            for z in range(L):
                s = 0.0
                for i in range(w):
                    s += q[(z + i) % L]
                b[z] = s / w
            change = 0.0
            for z in range(L):
                xn = eps[z] * (1.0 - b[z]) ** (d_v - 1)
                if xn > x[z] + _MONOTONE_SLACK:
                    return -1, t, 0.0, x
                change += abs(xn - x[z])
                x[z] = xn
            if change / L < delta:
                stopped = True
                break
        # a-posteriori bit erasure probability at the stopping point
        for z in range(L):
            s = 0.0
            for j in range(w):
                s += x[(z - j) % L]
            a[z] = s / w
        for z in range(L):
            q[z] = (1.0 - a[z]) ** (d_c - 1)
        pe = 0.0
        for z in range(L):
            s = 0.0
            for i in range(w):
                s += q[(z + i) % L]
            pe += eps[z] * (1.0 - s / w) ** d_v
        return (1 if stopped else 0), t, pe / L, x


def _run_python(eps, d_v, d_c, w, delta, max_iters, record_every=0):
    L = eps.shape[0]
    x = np.ones(L)
    snaps, when = [], []
    stopped = False
    t = 0
    while t < max_iters:
        t += 1
        xn, _ = _step_arrays(eps, x, d_v, d_c, w)
        if np.any(xn > x + _MONOTONE_SLACK):
            raise RuntimeError("density evolution violated iteration monotonicity")
        change = np.mean(np.abs(xn - x))
        x = xn
        if record_every and (t % record_every == 0 or t == 1):
            snaps.append(tuple(x))
            when.append(t)
        if change < delta:
            stopped = True
            break
    _, pe_vec = _step_arrays(eps, x, d_v, d_c, w)
    return stopped, t, float(np.mean(pe_vec)), x, snaps, when


def run_de(
    params: EnsembleParams,
    profile: ErasureProfile,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
    record_every: int = 0,
) -> DeResult | tuple[DeResult, DeTrace]:
    """Iterate density evolution from x^(0) = 1 until the mean-change rule fires.

    Returns a DeResult; with record_every > 0, returns (DeResult, DeTrace)
    with a snapshot every record_every iterations.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if len(profile) != params.L:
        raise ValueError(f"profile length {len(profile)} != L={params.L}")
    eps = profile.as_array()
    if record_every or not _HAVE_NUMBA:
        stopped, t, pe, x, snaps, when = _run_python(
            eps, params.d_v, params.d_c, params.w, delta, max_iters, record_every
        )
    else:
        code, t, pe, x = _run_core(eps, params.d_v, params.d_c, params.w, delta, max_iters)
        if code < 0:
            raise RuntimeError("density evolution violated iteration monotonicity")
        stopped = code == 1
        snaps, when = [], []
    result = DeResult(
        converged=bool(stopped and pe < delta),
        iterations_used=t,
        final_pe=pe,
        final_x=tuple(x),
        hit_iteration_cap=not stopped,
    )
    if record_every:
        return result, DeTrace(tuple(snaps), tuple(when), delta, max_iters)
    return result


def decodes(
    params: EnsembleParams,
    profile: ErasureProfile,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> bool:
    """Decodability predicate: mean-change rule fires with residual P_e < delta."""
    return run_de(params, profile, delta, max_iters).converged


def bp_threshold_uniform(
    params: EnsembleParams,
    pattern: ShorteningPattern | None = None,
    tol: float = 1e-4,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> float:
    """Largest uniform channel eps (within tol) decodable under the pattern.

    The profile probed is eps_z = (1 - alpha_z) * eps; bisection on [0, 1]
    returns the largest eps that actually decoded.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if pattern is None:
        pattern = ShorteningPattern(np.zeros(params.L))
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        profile = effective_profile_shortening(mid, pattern)
        if decodes(params, profile, delta, max_iters):
            lo = mid
        else:
            hi = mid
    return lo


_MAP_PROXY_L = 500
_MAP_PROXY_W = 5
_MAP_PROXY_MAX_ITERS = 300_000


@functools.lru_cache(maxsize=None)
def _map_threshold_cached(d_v: int, d_c: int, tol: float) -> float:
    proxy = EnsembleParams(d_v, d_c, _MAP_PROXY_L, _MAP_PROXY_W)
    return bp_threshold_uniform(
        proxy,
        terminated_pattern(proxy),
        tol=tol,
        max_iters=_MAP_PROXY_MAX_ITERS,
    )


def map_threshold(params: EnsembleParams, tol: float = 1e-4) -> float:
    """MAP threshold of the underlying (d_v, d_c) ensemble.

    Computed as the BP threshold of a long terminated coupled proxy chain
    (L=500, w=5), which saturates to the MAP threshold.  Cached per degree
    pair; the proxy needs a few seconds on first use.
    """
    return _map_threshold_cached(params.d_v, params.d_c, tol)
