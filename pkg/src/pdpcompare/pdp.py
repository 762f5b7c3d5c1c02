"""
Power delay profile container and the per-receiver processing chain.

A profile is a finite set of taps ``(excess_delay_ns, power_db)`` held in
strictly ascending delay order. Powers are either absolute (dBm, straight
from a ray-trace export) or relative to the strongest tap (dB).

The chain applied to every ray-traced receiver is::

    build_profile -> normalize_to_peak -> apply_threshold -> rezero_delays
"""

from __future__ import annotations

import enum
import io
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np


DEFAULT_BIN_WIDTH_NS = 1.0
DEFAULT_THRESHOLD_DB = -30.0

# bins whose coherent power falls below this fraction of their incoherent
# power are treated as fully cancelled
_CANCEL_RTOL = 1e-12


class PdpError(ValueError):
    """Invalid input to a profile operation."""


class CancellationWarning(RuntimeWarning):
    """Coherent combining cancelled one or more delay bins."""


class Frame(str, enum.Enum):
    ABSOLUTE_DBM = "absolute_dbm"
    PEAK_RELATIVE_DB = "peak_relative_db"


class Combine(str, enum.Enum):
    NONCOHERENT = "noncoherent"
    COHERENT = "coherent"


def db_to_linear(power_db):
    return np.power(10.0, np.asarray(power_db, dtype=float) / 10.0)


def linear_to_db(power_lin):
    return 10.0 * np.log10(np.asarray(power_lin, dtype=float))


@dataclass(frozen=True)
class MultipathRecord:
    """One propagation path as reported by the ray tracer."""

    path_id: int
    toa_s: float
    power_dbm: float
    phase_deg: float

    def __post_init__(self):
        if not math.isfinite(self.toa_s) or self.toa_s < 0:
            raise PdpError(f"invalid TOA: {self.toa_s!r}")
        if not math.isfinite(self.power_dbm):
            raise PdpError(f"invalid power: {self.power_dbm!r}")
        if not math.isfinite(self.phase_deg):
            raise PdpError(f"invalid phase: {self.phase_deg!r}")
        phase = self.phase_deg % 360.0
        if phase >= 360.0:  # tiny negative inputs wrap to exactly 360.0
            phase = 0.0
        object.__setattr__(self, "phase_deg", float(phase))


@dataclass(frozen=True)
class Tap:
    excess_delay_ns: float
    power_db: float


@dataclass(frozen=True, eq=False)
class PowerDelayProfile:
    """
    Immutable power delay profile.

    Parameters
    ----------
    delays_ns : array_like
        Excess delays in ns, strictly ascending, non-negative.
    powers_db : array_like
        Tap powers. dBm when ``frame`` is absolute, dB relative to the
        strongest tap otherwise.
    frame : Frame
    threshold_db : float or None
        Relative threshold already applied, if any.
    source_id : str
        Free-form label carried into reports.
    """

    delays_ns: np.ndarray
    powers_db: np.ndarray
    frame: Frame = Frame.ABSOLUTE_DBM
    threshold_db: float | None = None
    source_id: str = ""

    def __post_init__(self):
        d = np.array(self.delays_ns, dtype=float).reshape(-1)
        p = np.array(self.powers_db, dtype=float).reshape(-1)
        frame = Frame(self.frame)
        if d.size == 0:
            raise PdpError("empty profile")
        if d.shape != p.shape:
            raise PdpError("delay and power arrays differ in length")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(p))):
            raise PdpError("non-finite tap value")
        if np.any(d < 0):
            raise PdpError("negative excess delay")
        if np.any(np.diff(d) <= 0):
            raise PdpError("tap delays must be strictly ascending")
        if frame is Frame.PEAK_RELATIVE_DB and p.max() != 0.0:
            raise PdpError("peak-relative profile must have its peak at 0 dB")
        if self.threshold_db is not None:
            if frame is not Frame.PEAK_RELATIVE_DB:
                raise PdpError("threshold requires a peak-relative profile")
            if np.any(p < self.threshold_db):
                raise PdpError("tap below recorded threshold")
            object.__setattr__(self, "threshold_db", float(self.threshold_db))
        d.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "delays_ns", d)
        object.__setattr__(self, "powers_db", p)
        object.__setattr__(self, "frame", frame)

    def __len__(self):
        return self.delays_ns.size

    def __eq__(self, other):
        if not isinstance(other, PowerDelayProfile):
            return NotImplemented
        return (
            self.frame is other.frame
            and self.threshold_db == other.threshold_db
            and self.source_id == other.source_id
            and np.array_equal(self.delays_ns, other.delays_ns)
            and np.array_equal(self.powers_db, other.powers_db)
        )

    __hash__ = None

    @property
    def taps(self) -> tuple[Tap, ...]:
        return tuple(
            Tap(float(d), float(p)) for d, p in zip(self.delays_ns, self.powers_db)
        )

    @property
    def linear_powers(self) -> np.ndarray:
        return db_to_linear(self.powers_db)

    @classmethod
    def from_taps(cls, taps: Iterable[Tap | tuple[float, float]], **kwargs):
        pairs = [(t.excess_delay_ns, t.power_db) if isinstance(t, Tap) else t for t in taps]
        if not pairs:
            raise PdpError("empty profile")
        d, p = zip(*pairs)
        return cls(np.array(d), np.array(p), **kwargs)

    def replace(self, **changes) -> "PowerDelayProfile":
        fields = dict(
            delays_ns=self.delays_ns,
            powers_db=self.powers_db,
            frame=self.frame,
            threshold_db=self.threshold_db,
            source_id=self.source_id,
        )
        fields.update(changes)
        return PowerDelayProfile(**fields)


def build_profile(
    records: Sequence[MultipathRecord],
    bin_width_ns: float = DEFAULT_BIN_WIDTH_NS,
    combine: Combine | str = Combine.NONCOHERENT,
    source_id: str = "",
) -> PowerDelayProfile:
    """
    Bin ray-trace paths into an absolute-power PDP on an excess-delay axis.

    Excess delay is measured from the earliest path. Bins are half-open
    intervals ``[k*w, (k+1)*w)``; each occupied bin yields one tap placed at
    the power-weighted mean delay of its members.

    In noncoherent mode the linear powers of a bin are summed. In coherent
    mode complex amplitudes ``sqrt(P) * exp(j*phase)`` are summed and the
    squared magnitude kept; bins that cancel completely are dropped with a
    :class:`CancellationWarning`.
    """
    if len(records) == 0:
        raise PdpError("empty input")
    if not (bin_width_ns > 0 and math.isfinite(bin_width_ns)):
        raise PdpError("invalid bin width")
    combine = Combine(combine)

    toa = np.array([r.toa_s for r in records], dtype=float)
    p_lin = db_to_linear([r.power_dbm for r in records])
    delay_ns = (toa - toa.min()) * 1e9
    bins = np.floor(delay_ns / bin_width_ns).astype(np.int64)

    uniq, inverse = np.unique(bins, return_inverse=True)
    n = uniq.size
    p_sum = np.bincount(inverse, weights=p_lin, minlength=n)
    tap_delay = np.bincount(inverse, weights=p_lin * delay_ns, minlength=n) / p_sum

    if combine is Combine.NONCOHERENT:
        tap_power = p_sum
    else:
        phase = np.deg2rad([r.phase_deg for r in records])
        amp = np.sqrt(p_lin) * np.exp(1j * phase)
        field = np.bincount(inverse, weights=amp.real, minlength=n) + 1j * np.bincount(
            inverse, weights=amp.imag, minlength=n
        )
        tap_power = np.abs(field) ** 2
        keep = tap_power > _CANCEL_RTOL * p_sum
        if not np.all(keep):
            warnings.warn(
                f"{int(np.count_nonzero(~keep))} delay bin(s) cancelled by coherent "
                "combining and dropped",
                CancellationWarning,
                stacklevel=2,
            )
            if not np.any(keep):
                raise PdpError("all delay bins cancelled")
            tap_delay, tap_power = tap_delay[keep], tap_power[keep]

    return PowerDelayProfile(
        tap_delay,
        linear_to_db(tap_power),
        frame=Frame.ABSOLUTE_DBM,
        source_id=source_id,
    )


def normalize_to_peak(pdp: PowerDelayProfile) -> PowerDelayProfile:
    """Shift powers so that the strongest tap sits at 0 dB."""
    if pdp.frame is Frame.PEAK_RELATIVE_DB:
        return pdp
    p = pdp.powers_db - pdp.powers_db.max()
    return pdp.replace(powers_db=p, frame=Frame.PEAK_RELATIVE_DB, threshold_db=None)


def apply_threshold(
    pdp: PowerDelayProfile, threshold_db: float = DEFAULT_THRESHOLD_DB
) -> PowerDelayProfile:
    """
    Drop taps weaker than ``threshold_db`` relative to the peak.

    Taps exactly at the threshold are kept. The recorded threshold is the
    stricter of the existing one and ``threshold_db``, so repeated
    application commutes.
    """
    if not (threshold_db < 0 and math.isfinite(threshold_db)):
        raise PdpError("invalid threshold")
    if pdp.frame is not Frame.PEAK_RELATIVE_DB:
        raise PdpError("profile not normalized")
    keep = pdp.powers_db >= threshold_db
    recorded = threshold_db if pdp.threshold_db is None else max(pdp.threshold_db, threshold_db)
    return pdp.replace(
        delays_ns=pdp.delays_ns[keep],
        powers_db=pdp.powers_db[keep],
        threshold_db=recorded,
    )


def rezero_delays(pdp: PowerDelayProfile) -> PowerDelayProfile:
    """Shift delays so that the first tap is at 0 ns."""
    first = pdp.delays_ns[0]
    if first == 0.0:
        return pdp
    return pdp.replace(delays_ns=pdp.delays_ns - first)


def process_profile(
    pdp: PowerDelayProfile,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    rezero: bool = True,
) -> PowerDelayProfile:
    """Normalize, threshold and (by default) re-reference delays to the first surviving tap."""
    out = apply_threshold(normalize_to_peak(pdp), threshold_db)
    return rezero_delays(out) if rezero else out


# --- interchange format ---------------------------------------------------


def format_header(pdp: PowerDelayProfile) -> str:
    thr = "none" if pdp.threshold_db is None else repr(pdp.threshold_db)
    return f"# frame={pdp.frame.value} threshold_db={thr} source={pdp.source_id}"


def write_pdp(pdp: PowerDelayProfile, stream: TextIO) -> None:
    """Write ``pdp`` as a header line followed by ``delay_ns,power_db`` rows."""
    stream.write(format_header(pdp) + "\n")
    for d, p in zip(pdp.delays_ns, pdp.powers_db):
        stream.write(f"{float(d)!r},{float(p)!r}\n")


def dumps_pdp(pdp: PowerDelayProfile) -> str:
    buf = io.StringIO()
    write_pdp(pdp, buf)
    return buf.getvalue()


def read_pdp(stream: TextIO) -> PowerDelayProfile:
    """Parse a profile written by :func:`write_pdp`."""
    header = stream.readline()
    if not header.startswith("#"):
        raise PdpError("bad header")
    meta = {}
    body = header[1:].strip()
    # source is last and may contain spaces
    head, sep, source = body.partition("source=")
    if not sep:
        raise PdpError("bad header")
    for item in head.split():
        key, eq, value = item.partition("=")
        if not eq:
            raise PdpError("bad header")
        meta[key] = value
    try:
        frame = Frame(meta["frame"])
        thr_text = meta["threshold_db"]
    except (KeyError, ValueError) as exc:
        raise PdpError("bad header") from exc
    threshold = None if thr_text == "none" else float(thr_text)

    delays, powers = [], []
    for lineno, line in enumerate(stream, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            delays.append(float(parts[0]))
            powers.append(float(parts[1]))
        except ValueError:
            raise PdpError(f"parse error at line {lineno}") from None
    return PowerDelayProfile(
        np.array(delays), np.array(powers), frame=frame, threshold_db=threshold, source_id=source
    )


def loads_pdp(text: str) -> PowerDelayProfile:
    return read_pdp(io.StringIO(text))
