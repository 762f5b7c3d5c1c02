"""Delay-domain statistics of a power delay profile."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .pdp import (
    DEFAULT_THRESHOLD_DB,
    Frame,
    PdpError,
    PowerDelayProfile,
    process_profile,
)


class MeanMode(str, enum.Enum):
    """How taps are weighted when averaging delays.

    ``UNWEIGHTED`` is the plain arithmetic mean of the tap delays; it is the
    convention that reproduces the published TDL mean excess delays.
    """

    POWER_WEIGHTED = "power_weighted"
    UNWEIGHTED = "unweighted"


def _weights(pdp: PowerDelayProfile, mode) -> np.ndarray:
    if len(pdp) == 0:
        raise PdpError("empty profile")
    if MeanMode(mode) is MeanMode.POWER_WEIGHTED:
        return pdp.linear_powers
    return np.ones(len(pdp))


def _excess(pdp: PowerDelayProfile) -> np.ndarray:
    # measured from the first tap even if the caller skipped rezero_delays
    return pdp.delays_ns - pdp.delays_ns[0]


def mean_excess_delay(pdp: PowerDelayProfile, mode=MeanMode.POWER_WEIGHTED) -> float:
    w = _weights(pdp, mode)
    return float(np.sum(w * _excess(pdp)) / np.sum(w))


def rms_delay_spread(pdp: PowerDelayProfile, mode=MeanMode.POWER_WEIGHTED) -> float:
    """Square root of the second central moment of the tap delays."""
    w = _weights(pdp, mode)
    tau = _excess(pdp)
    mean = np.sum(w * tau) / np.sum(w)
    var = np.sum(w * (tau - mean) ** 2) / np.sum(w)
    return float(np.sqrt(var))


def effective_max_delay(
    pdp: PowerDelayProfile, threshold_db: float = DEFAULT_THRESHOLD_DB
) -> float:
    """Delay span of taps within ``threshold_db`` of the peak."""
    if len(pdp) == 0:
        raise PdpError("empty profile")
    if pdp.frame is not Frame.PEAK_RELATIVE_DB:
        raise PdpError("profile not normalized")
    d = pdp.delays_ns[pdp.powers_db >= threshold_db]
    return float(d[-1] - d[0])


@dataclass(frozen=True)
class DelayMetrics:
    rms_ds_ns: float
    mean_excess_ns: float
    mean_mode: MeanMode
    eff_max_ns: float
    threshold_db: float
    tap_count: int

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mean_mode"] = self.mean_mode.value
        return out


def summarize(
    pdp: PowerDelayProfile,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    mean_mode=MeanMode.POWER_WEIGHTED,
) -> DelayMetrics:
    """
    Threshold, re-zero and compute all delay metrics on the surviving taps.

    Absolute-power profiles are normalized to their peak first. The RMS
    delay spread is always power weighted; ``mean_mode`` only selects the
    mean excess delay convention.
    """
    mean_mode = MeanMode(mean_mode)
    kept = process_profile(pdp, threshold_db)
    return DelayMetrics(
        rms_ds_ns=rms_delay_spread(kept, MeanMode.POWER_WEIGHTED),
        mean_excess_ns=mean_excess_delay(kept, mean_mode),
        mean_mode=mean_mode,
        eff_max_ns=effective_max_delay(kept, threshold_db),
        threshold_db=float(threshold_db),
        tap_count=len(kept),
    )
