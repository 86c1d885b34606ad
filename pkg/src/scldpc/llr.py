"""Quantized LLR densities and their arithmetic for BMS-channel DE.

Densities are probability masses on uniformly spaced LLR centers spanning
[-C, C], plus a separate bucket at +infinity for known bits (so repeated
saturation does not bias the finite bins).  The grid always contains an
exact zero center: erasure mass must stay at LLR 0 through box-plus and
convolution for the BEC embedding to be exact, so an even level count is
bumped to the next odd one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError

MASS_TOL = 1e-9


class LlrGrid:
    """Uniform LLR quantization grid with a precomputed box-plus bin table."""

    def __init__(self, half_range: float = 20.0, levels: int = 1000):
        if half_range <= 0.0:
            raise ValueError("half_range must be positive")
        if levels < 3:
            raise ValueError("need at least 3 levels")
        if levels % 2 == 0:
            levels += 1  # keep an exact zero center
        self.half_range = float(half_range)
        self.levels = int(levels)
        self.centers = np.linspace(-self.half_range, self.half_range, self.levels)
        self.centers[self.levels // 2] = 0.0
        self.step = float(self.centers[1] - self.centers[0])
        self.zero_index = self.levels // 2
        self._boxplus_table = None

    def __eq__(self, other):
        return (
            isinstance(other, LlrGrid)
            and self.half_range == other.half_range
            and self.levels == other.levels
        )

    def __hash__(self):
        return hash((self.half_range, self.levels))

    def __repr__(self):
        return f"LlrGrid(half_range={self.half_range}, levels={self.levels})"

    def bin_of(self, values: np.ndarray) -> np.ndarray:
        """Nearest-center bin indices, saturating at the grid edges."""
        idx = np.rint((np.asarray(values) + self.half_range) / self.step)
        return np.clip(idx, 0, self.levels - 1).astype(np.int64)

    @property
    def boxplus_table(self) -> np.ndarray:
        """(K, K) table of output bins of box-plus over center pairs."""
        if self._boxplus_table is None:
            a = self.centers[:, None]
            b = self.centers[None, :]
            self._boxplus_table = self.bin_of(boxplus(a, b)).astype(np.int32)
        return self._boxplus_table


_GRID_CACHE: dict[tuple[float, int], LlrGrid] = {}


def make_grid(half_range: float = 20.0, levels: int = 1000) -> LlrGrid:
    """Shared grid instance (box-plus tables are expensive to rebuild)."""
    grid = LlrGrid(half_range, levels)
    key = (grid.half_range, grid.levels)
    return _GRID_CACHE.setdefault(key, grid)


def boxplus(a, b):
    """Check-node combining rule 2 atanh(tanh(a/2) tanh(b/2)), stably."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = np.sign(a) * np.sign(b)
    m = np.minimum(np.abs(a), np.abs(b))
    return s * m + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))


@dataclass(frozen=True)
class LlrDensity:
    """Probability mass over a grid's LLR centers plus a known-bit bucket."""

    bins: np.ndarray
    inf_mass: float
    grid: LlrGrid

    def __init__(self, bins, inf_mass: float, grid: LlrGrid, normalize: bool = False):
        bins = np.asarray(bins, dtype=float)
        if bins.shape != (grid.levels,):
            raise ValueError(f"bins must have shape ({grid.levels},)")
        if np.any(bins < 0.0) or inf_mass < 0.0:
            raise ValueError("masses must be non-negative")
        total = bins.sum() + inf_mass
        if normalize:
            bins = bins / total
            inf_mass = inf_mass / total
        elif abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total} deviates from 1 by more than {MASS_TOL:g}")
        bins = bins.copy()
        bins.flags.writeable = False
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "inf_mass", float(inf_mass))
        object.__setattr__(self, "grid", grid)

    def total_mass(self) -> float:
        return float(self.bins.sum() + self.inf_mass)

    def error_probability(self) -> float:
        """Negative-LLR mass plus half the exact-zero (erasure) mass."""
        z = self.grid.zero_index
        return float(self.bins[:z].sum() + 0.5 * self.bins[z])

    def erasure_mass(self) -> float:
        return float(self.bins[self.grid.zero_index])

    def mean(self) -> float:
        if self.inf_mass > 0.0:
            return math.inf
        return float(np.dot(self.bins, self.grid.centers))

    def symmetry_defect(self) -> float:
        """Total deviation from the symmetry condition p(-l) = e^(-l) p(l)."""
        c = self.grid.centers
        pos = c > 0.0
        expected_neg = np.exp(-c[pos]) * self.bins[pos]
        actual_neg = self.bins[::-1][pos]
        return float(np.abs(actual_neg - expected_neg).sum())

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["llr_center", "mass"])
            for c, m in zip(self.grid.centers, self.bins):
                writer.writerow([repr(float(c)), repr(float(m))])
            writer.writerow(["inf", repr(self.inf_mass)])


def point_mass(grid: LlrGrid, value: float) -> LlrDensity:
    bins = np.zeros(grid.levels)
    bins[grid.bin_of(np.array([value]))[0]] = 1.0
    return LlrDensity(bins, 0.0, grid)


def erasure_density(grid: LlrGrid) -> LlrDensity:
    return point_mass(grid, 0.0)


def known_bit_density(grid: LlrGrid) -> LlrDensity:
    return LlrDensity(np.zeros(grid.levels), 1.0, grid)


def bec_density(grid: LlrGrid, eps: float) -> LlrDensity:
    """Erasure-channel density: mass eps at LLR 0, the rest at +infinity."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    bins = np.zeros(grid.levels)
    bins[grid.zero_index] = eps
    return LlrDensity(bins, 1.0 - eps, grid)


def mix(a: LlrDensity, b: LlrDensity, weight_a: float) -> LlrDensity:
    """Mixture weight_a * a + (1 - weight_a) * b."""
    _require_same_grid(a, b)
    if not 0.0 <= weight_a <= 1.0:
        raise ValueError("mixture weight must lie in [0, 1]")
    wb = 1.0 - weight_a
    return LlrDensity(
        weight_a * a.bins + wb * b.bins, weight_a * a.inf_mass + wb * b.inf_mass, a.grid
    )


def _require_same_grid(a: LlrDensity, b: LlrDensity):
    if a.grid != b.grid:
        raise GridMismatchError(f"{a.grid} vs {b.grid}")


def vn_convolve(a: LlrDensity, b: LlrDensity) -> LlrDensity:
    """Density of the sum of independent LLRs (variable-node update).

    Out-of-range sums clip into the boundary bins; +infinity absorbs.
    """
    _require_same_grid(a, b)
    bins = convolve_bins(a.bins, b.bins, a.grid)
    inf = a.inf_mass + b.inf_mass - a.inf_mass * b.inf_mass
    return LlrDensity(bins, inf, a.grid)


def convolve_bins(pa: np.ndarray, pb: np.ndarray, grid: LlrGrid) -> np.ndarray:
    """Full discrete convolution folded back onto the grid edges."""
    full = np.convolve(pa, pb)
    h = grid.zero_index  # (K-1)/2
    out = full[h : h + grid.levels].copy()
    out[0] += full[:h].sum()
    out[-1] += full[h + grid.levels :].sum()
    return out


def cn_combine(a: LlrDensity, b: LlrDensity) -> LlrDensity:
    """Density of the box-plus of independent LLRs (check-node update).

    +infinity is the identity; the exact-zero (erasure) bin annihilates.
    """
    _require_same_grid(a, b)
    bins = combine_bins(a.bins, a.inf_mass, b.bins, b.inf_mass, a.grid)
    return LlrDensity(bins, a.inf_mass * b.inf_mass, a.grid)


def combine_bins(pa, a_inf, pb, b_inf, grid: LlrGrid) -> np.ndarray:
    table = grid.boxplus_table
    outer = pa[:, None] * pb[None, :]
    out = np.bincount(table.ravel(), weights=outer.ravel(), minlength=grid.levels)
    if a_inf:
        out += a_inf * pb
    if b_inf:
        out += b_inf * pa
    return out


def bawgn_density(snr_db: float, grid: LlrGrid) -> LlrDensity:
    """LLR density of BPSK over AWGN at Es/N0 = snr_db.

    With noise variance s2 = 1/(2 * 10^(snr/10)) the LLR is Gaussian with
    mean 2/s2 and variance 4/s2 (conditioned on the all-zero codeword).
    """
    sigma2 = 1.0 / (2.0 * 10.0 ** (snr_db / 10.0))
    mu = 2.0 / sigma2
    sd = math.sqrt(4.0 / sigma2)
    bins = np.exp(-((grid.centers - mu) ** 2) / (2.0 * sd * sd)) * grid.step
    bins /= sd * math.sqrt(2.0 * math.pi)
    # open tails fold into the edge bins
    lo_edge = grid.centers[0] - 0.5 * grid.step
    hi_edge = grid.centers[-1] + 0.5 * grid.step
    bins[0] += 0.5 * math.erfc((mu - lo_edge) / (sd * math.sqrt(2.0)))
    bins[-1] += 0.5 * math.erfc((hi_edge - mu) / (sd * math.sqrt(2.0)))
    density = LlrDensity(bins, 0.0, grid, normalize=True)
    _check_channel_symmetry(density)
    return density


@dataclass(frozen=True)
class BicmChannelPair:
    """The two Gray-labeled 4-ASK bit channels at a given Es/N0."""

    snr_db: float
    density1: LlrDensity
    density2: LlrDensity


# Unit-energy 4-ASK points and their Gray labels (b1 b2):
# 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3 (all scaled by 1/sqrt(5)).
_ASK4_POINTS = np.array([-3.0, -1.0, 1.0, 3.0]) / math.sqrt(5.0)
_ASK4_LABELS = np.array([[0, 0], [0, 1], [1, 1], [1, 0]])


def ask4_bicm_densities(
    snr_db: float, grid: LlrGrid, samples: int = 1 << 17, span: float = 9.0
) -> BicmChannelPair:
    """Bit-metric LLR densities of Gray 4-ASK over AWGN, channel-adapted.

    The observation axis is integrated by a fine trapezoid rule over
    [min symbol - span*sigma, max symbol + span*sigma]; channel adaptation
    averages the bit-0 conditional with the sign-flipped bit-1 conditional,
    making both outputs symmetric.
    """
    sigma2 = 1.0 / (2.0 * 10.0 ** (snr_db / 10.0))
    sigma = math.sqrt(sigma2)
    y = np.linspace(_ASK4_POINTS[0] - span * sigma, _ASK4_POINTS[-1] + span * sigma, samples)
    wy = np.full(samples, (y[-1] - y[0]) / (samples - 1))
    wy[0] *= 0.5
    wy[-1] *= 0.5
    # bit-metric LLRs on the y grid, via stable log-sum-exp
    metrics = -((y[:, None] - _ASK4_POINTS[None, :]) ** 2) / (2.0 * sigma2)
    densities = []
    for bit in (0, 1):
        zero_set = _ASK4_LABELS[:, bit] == 0
        llr = _logsumexp(metrics[:, zero_set]) - _logsumexp(metrics[:, ~zero_set])
        bins = np.zeros(grid.levels)
        for x, label in zip(_ASK4_POINTS, _ASK4_LABELS):
            weight = np.exp(-((y - x) ** 2) / (2.0 * sigma2)) / math.sqrt(2.0 * math.pi * sigma2) * wy
            signed = llr if label[bit] == 0 else -llr
            # each symbol has prior 1/4; adaptation averages the two conditionals
            bins += 0.25 * np.bincount(grid.bin_of(signed), weights=weight, minlength=grid.levels)
        density = LlrDensity(bins, 0.0, grid, normalize=True)
        _check_channel_symmetry(density)
        densities.append(density)
    return BicmChannelPair(float(snr_db), densities[0], densities[1])


def _logsumexp(a):
    mx = a.max(axis=1)
    return np.log(np.exp(a - mx[:, None]).sum(axis=1)) + mx


def _check_channel_symmetry(density: LlrDensity):
    defect = density.symmetry_defect()
    tol = 10.0 * density.grid.step
    if defect > tol:
        raise RuntimeError(
            f"channel density violates symmetry: defect {defect:.3e} > {tol:.3e}"
        )
