"""
KL divergence between two power delay profiles.

Both profiles are converted to linear power, placed on a shared uniform
delay grid, turned into probability masses and compared with

    D(P || Q) = sum_i P_i * log2(P_i / Q_i)   [bits]

where P is the reference (site-specific) profile and Q the approximation
(TDL model). Empty grid bins are floored at a small fraction of the total
mass so the result stays finite when supports do not overlap.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .pdp import Frame, PdpError, PowerDelayProfile

DEFAULT_STEP_NS = 1.0
DEFAULT_EPSILON = 1e-10


class ResampleMethod(str, enum.Enum):
    BIN_ACCUMULATE = "bin_accumulate"
    LINEAR_INTERP = "linear_interp"


@dataclass(frozen=True)
class DelayGrid:
    """Uniform grid of ``n_bins`` points ``start_ns + i * step_ns``.

    Each point is the center of a bin of width ``step_ns``.
    """

    start_ns: float
    step_ns: float
    n_bins: int

    def __post_init__(self):
        if not (self.step_ns > 0 and math.isfinite(self.step_ns)):
            raise PdpError("invalid grid step")
        if self.n_bins < 2:
            raise PdpError("grid needs at least 2 bins")

    @property
    def points(self) -> np.ndarray:
        return self.start_ns + self.step_ns * np.arange(self.n_bins)

    @property
    def stop_ns(self) -> float:
        return self.start_ns + self.step_ns * (self.n_bins - 1)

    def covers(self, delays_ns) -> bool:
        d = np.asarray(delays_ns, dtype=float)
        half = 0.5 * self.step_ns
        return bool(np.all(d >= self.start_ns - half) and np.all(d <= self.stop_ns + half))

    @classmethod
    def union(cls, *profiles: PowerDelayProfile, step_ns: float = DEFAULT_STEP_NS) -> "DelayGrid":
        """Smallest grid anchored at the earliest tap that spans every profile."""
        if not (step_ns > 0 and math.isfinite(step_ns)):
            raise PdpError("invalid grid step")
        lo = min(float(p.delays_ns[0]) for p in profiles)
        hi = max(float(p.delays_ns[-1]) for p in profiles)
        n = int(math.ceil((hi - lo) / step_ns - 1e-9)) + 1
        return cls(lo, float(step_ns), max(n, 2))


@dataclass(frozen=True, eq=False)
class ProbabilityMass:
    masses: np.ndarray
    epsilon: float
    grid: DelayGrid | None = None

    def __len__(self):
        return self.masses.size


@dataclass(frozen=True)
class KlResult:
    bits: float
    grid: DelayGrid
    epsilon: float
    reference_id: str
    approx_id: str
    method: ResampleMethod = ResampleMethod.BIN_ACCUMULATE

    def to_dict(self) -> dict:
        return {
            "bits": self.bits,
            "reference_id": self.reference_id,
            "approx_id": self.approx_id,
            "grid_start_ns": self.grid.start_ns,
            "grid_step_ns": self.grid.step_ns,
            "grid_n_bins": self.grid.n_bins,
            "epsilon": self.epsilon,
            "method": self.method.value,
        }


def resample(
    pdp: PowerDelayProfile,
    grid: DelayGrid,
    method=ResampleMethod.BIN_ACCUMULATE,
) -> np.ndarray:
    """
    Linear tap powers on ``grid``.

    ``bin_accumulate`` adds each tap's full power to its nearest grid point
    (ties go to the later point), conserving total power.
    ``linear_interp`` samples the piecewise-linear interpolant of the tap
    powers at the grid points and is zero outside the tap support.
    """
    if not grid.covers(pdp.delays_ns):
        raise PdpError("grid too small")
    lin = pdp.linear_powers
    method = ResampleMethod(method)
    if method is ResampleMethod.BIN_ACCUMULATE:
        idx = np.floor((pdp.delays_ns - grid.start_ns) / grid.step_ns + 0.5).astype(np.int64)
        idx = np.clip(idx, 0, grid.n_bins - 1)
        return np.bincount(idx, weights=lin, minlength=grid.n_bins)
    return np.interp(grid.points, pdp.delays_ns, lin, left=0.0, right=0.0)


def to_probability(values, epsilon: float = DEFAULT_EPSILON, grid: DelayGrid | None = None) -> ProbabilityMass:
    """Floor at ``epsilon`` times the total, then renormalize to unit sum."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise PdpError("invalid epsilon")
    v = np.asarray(values, dtype=float).reshape(-1)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise PdpError("values must be finite and non-negative")
    total = v.sum()
    if total <= 0:
        raise PdpError("degenerate distribution")
    # normalize before flooring; epsilon * total can underflow for tiny totals
    v = np.maximum(v / total, epsilon)
    masses = v / v.sum()
    masses.flags.writeable = False
    return ProbabilityMass(masses, float(epsilon), grid)


def kl_bits(p: ProbabilityMass, q: ProbabilityMass) -> float:
    """D(p || q) in bits."""
    if len(p) != len(q) or (p.grid is not None and q.grid is not None and p.grid != q.grid):
        raise PdpError("incompatible supports")
    return float(np.sum(p.masses * np.log2(p.masses / q.masses)))


def compare(
    reference: PowerDelayProfile,
    approx: PowerDelayProfile,
    step_ns: float = DEFAULT_STEP_NS,
    epsilon: float = DEFAULT_EPSILON,
    method=ResampleMethod.BIN_ACCUMULATE,
) -> KlResult:
    """KL divergence of ``approx`` from ``reference`` on their union grid."""
    for pdp in (reference, approx):
        if pdp.frame is not Frame.PEAK_RELATIVE_DB:
            raise PdpError("profile not normalized")
    method = ResampleMethod(method)
    grid = DelayGrid.union(reference, approx, step_ns=step_ns)
    p = to_probability(resample(reference, grid, method), epsilon, grid)
    q = to_probability(resample(approx, grid, method), epsilon, grid)
    return KlResult(
        bits=kl_bits(p, q),
        grid=grid,
        epsilon=float(epsilon),
        reference_id=reference.source_id,
        approx_id=approx.source_id,
        method=method,
    )
