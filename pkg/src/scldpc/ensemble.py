"""Ensemble parameters, shortening/interleaving patterns and the design rate.

A tail-biting spatially coupled LDPC ensemble is described by the tuple
(d_v, d_c, L, w, n): L spatial positions on a ring, variable degree d_v,
check degree d_c, smoothing window w, and (optionally) n code bits per
position.  Shortening assigns each position a fraction alpha_z of code
bits fixed to zero; interleaving over two parallel channels assigns each
position a fraction beta_z of bits sent over the first channel.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePatternError

BALANCE_TOL = 1e-9


@dataclass(frozen=True)
class EnsembleParams:
    """Parameters (d_v, d_c, L, w, n) of a tail-biting SC-LDPC ensemble.

    n is optional: every asymptotic (density evolution) operation is
    independent of n; only finite-length sampling requires it.
    """

    d_v: int
    d_c: int
    L: int
    w: int
    n: int | None = None

    def __post_init__(self):
        if self.d_v < 2:
            raise ValueError(f"d_v must be >= 2, got {self.d_v}")
        if self.d_c <= self.d_v:
            raise ValueError(f"d_c must exceed d_v, got d_c={self.d_c} d_v={self.d_v}")
        if self.w < 1:
            raise ValueError(f"w must be >= 1, got {self.w}")
        # w = 1 decouples the positions entirely, so any L >= 1 is meaningful
        # (an uncoupled proxy); coupled chains need at least two windows.
        min_L = 1 if self.w == 1 else 2 * self.w
        if self.L < min_L:
            raise ValueError(f"L must be >= {min_L} for w={self.w}, got {self.L}")
        if self.n is not None:
            if self.n < 1:
                raise ValueError(f"n must be positive, got {self.n}")
            if (self.n * self.d_v) % self.d_c != 0:
                raise ValueError(
                    f"n*d_v must be divisible by d_c (m integral): n={self.n}, "
                    f"d_v={self.d_v}, d_c={self.d_c}"
                )

    @property
    def m(self) -> int:
        """Parity checks per position; requires n."""
        if self.n is None:
            raise ValueError("m is undefined without n")
        return self.n * self.d_v // self.d_c

    @property
    def N(self) -> int:
        if self.n is None:
            raise ValueError("N is undefined without n")
        return self.L * self.n

    @property
    def M(self) -> int:
        return self.L * self.m

    @property
    def uncoupled_rate(self) -> float:
        return 1.0 - self.d_v / self.d_c


def _check_unit_interval(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"every {name} entry must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class ShorteningPattern:
    """Per-position shortening fractions alpha_z in [0, 1]."""

    alpha: tuple[float, ...]
    grid: float = 1e-3  # quantization resolution used by the exhaustive search

    def __init__(self, alpha, grid: float = 1e-3):
        arr = _check_unit_interval(alpha, "alpha")
        if not np.any(arr < 1.0):
            raise ValueError("at least one position must keep unshortened bits")
        object.__setattr__(self, "alpha", tuple(float(a) for a in arr))
        object.__setattr__(self, "grid", float(grid))

    def __len__(self):
        return len(self.alpha)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)

    def to_json(self) -> str:
        return json.dumps(list(self.alpha))

    @classmethod
    def from_json(cls, text: str, grid: float = 1e-3) -> "ShorteningPattern":
        return cls(json.loads(text), grid=grid)

    def write_csv(self, path, profile: "ErasureProfile | None" = None) -> None:
        _write_position_csv(path, "alpha", self.alpha, profile)


@dataclass(frozen=True)
class InterleavingPattern:
    """Per-position fractions beta_z of bits sent over the first channel.

    The two channels are used equally often, so sum(beta) must equal L/2.
    """

    beta: tuple[float, ...]

    def __init__(self, beta):
        arr = _check_unit_interval(beta, "beta")
        balance = arr.sum() - arr.size / 2.0
        if abs(balance) > BALANCE_TOL:
            raise ValueError(
                f"sum(beta) must equal L/2 within {BALANCE_TOL:g}; off by {balance:.3e}"
            )
        object.__setattr__(self, "beta", tuple(float(b) for b in arr))

    def __len__(self):
        return len(self.beta)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)

    def to_json(self) -> str:
        return json.dumps(list(self.beta))

    @classmethod
    def from_json(cls, text: str) -> "InterleavingPattern":
        return cls(json.loads(text))

    def write_csv(self, path, profile: "ErasureProfile | None" = None) -> None:
        _write_position_csv(path, "beta", self.beta, profile)


@dataclass(frozen=True)
class ErasureProfile:
    """Per-position channel erasure probabilities eps_z."""

    eps: tuple[float, ...]

    def __init__(self, eps):
        arr = _check_unit_interval(eps, "eps")
        object.__setattr__(self, "eps", tuple(float(e) for e in arr))

    def __len__(self):
        return len(self.eps)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.eps, dtype=float)

    def to_json(self) -> str:
        return json.dumps(list(self.eps))

    @classmethod
    def from_json(cls, text: str) -> "ErasureProfile":
        return cls(json.loads(text))


def _write_position_csv(path, name, values, profile=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if profile is None:
            writer.writerow(["z", name])
            for z, v in enumerate(values):
                writer.writerow([z, repr(float(v))])
        else:
            writer.writerow(["z", name, "eps"])
            for z, (v, e) in enumerate(zip(values, profile.eps)):
                writer.writerow([z, repr(float(v)), repr(float(e))])


def window_average(values: np.ndarray, w: int) -> np.ndarray:
    """Circular backward window average: out[z] = mean(values[(z-j) mod L], j<w)."""
    out = np.zeros_like(values, dtype=float)
    for j in range(w):
        out += np.roll(values, j)
    return out / w


def design_rate(params: EnsembleParams, pattern: ShorteningPattern) -> float:
    """Design rate of the shortened tail-biting ensemble.

    R(alpha) = 1 - (d_v/d_c) * (L - sum_z s_z^{d_c}) / (L - sum_z alpha_z)
    with s_z the circular w-window average of alpha ending at z.

    Raises DegeneratePatternError when the pattern shortens all bits.
    """
    alpha = pattern.as_array()
    if alpha.size != params.L:
        raise ValueError(f"pattern length {alpha.size} != L={params.L}")
    removed = alpha.sum()
    denom = params.L - removed
    if denom <= 0.0:
        raise DegeneratePatternError(f"sum(alpha)={removed} >= L={params.L}")
    s = window_average(alpha, params.w)
    num = params.L - np.sum(s ** params.d_c)
    return 1.0 - (params.d_v / params.d_c) * num / denom


def terminated_pattern(params: EnsembleParams) -> ShorteningPattern:
    """Full shortening of the first w-1 positions (classic termination)."""
    alpha = np.zeros(params.L)
    alpha[: params.w - 1] = 1.0
    return ShorteningPattern(alpha)


def effective_profile_shortening(base_eps: float, pattern: ShorteningPattern) -> ErasureProfile:
    """Channel seen by the shortened code: eps_z = (1 - alpha_z) * eps."""
    if not 0.0 <= base_eps <= 1.0:
        raise ValueError(f"base_eps must lie in [0, 1], got {base_eps}")
    return ErasureProfile((1.0 - pattern.as_array()) * base_eps)


def effective_profile_interleaving(
    eps1: float, eps2: float, pattern: InterleavingPattern
) -> ErasureProfile:
    """Mixture channel of two BECs: eps_z = beta_z*eps1 + (1-beta_z)*eps2."""
    for name, v in (("eps1", eps1), ("eps2", eps2)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    beta = pattern.as_array()
    return ErasureProfile(beta * eps1 + (1.0 - beta) * eps2)
