"""
Readers for ray-tracer path exports and a seeded synthetic generator.

Canonical CSV layout (one path per row)::

    tx_id,rx_id,path_id,toa_s,power_dbm,phase_deg
    Tx1,484,1,2.2017e-07,-71.3,118.2

Whitespace CIR exports are read by :func:`parse_insite_cir`; see its
docstring for the directives it understands.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .pdp import MultipathRecord, PdpError

CSV_COLUMNS = ("tx_id", "rx_id", "path_id", "toa_s", "power_dbm", "phase_deg")
_INSITE_KEYS = ("path", "toa_s", "power_dbm", "phase_deg")


class ParseError(PdpError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class RowReject:
    line: int
    reason: str
    tx_id: str | None = None
    rx_id: int | None = None


@dataclass(frozen=True)
class PathDataset:
    receiver_id: int
    transmitter_id: str
    records: tuple[MultipathRecord, ...]

    def __post_init__(self):
        if not self.records:
            raise PdpError("dataset has no records")
        object.__setattr__(self, "records", tuple(self.records))


def _record_from_fields(lineno, path_id, toa, power, phase) -> MultipathRecord:
    try:
        path_id = int(path_id)
        toa, power, phase = float(toa), float(power), float(phase)
    except ValueError:
        raise ParseError(f"parse error at line {lineno}", lineno) from None
    if not math.isfinite(toa) or toa < 0:
        raise ParseError(f"invalid TOA at line {lineno}", lineno)
    if not (math.isfinite(power) and math.isfinite(phase)):
        raise ParseError(f"parse error at line {lineno}", lineno)
    return MultipathRecord(path_id, toa, power, phase)


def _group(rows: Iterable[tuple[str, int, MultipathRecord]]) -> list[PathDataset]:
    groups: dict[tuple[str, int], list[MultipathRecord]] = {}
    for tx, rx, rec in rows:
        groups.setdefault((tx, rx), []).append(rec)
    return [PathDataset(rx, tx, tuple(recs)) for (tx, rx), recs in groups.items()]


def read_paths_csv(stream: TextIO) -> tuple[list[PathDataset], list[RowReject]]:
    """
    Lenient canonical-CSV reader.

    Returns the datasets built from every valid row together with one
    :class:`RowReject` per malformed row, so ``rows = records + rejects``.
    A missing or wrong header still raises :class:`ParseError`.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("bad header", 1) from None
    if tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise ParseError("bad header", 1)

    good: list[tuple[str, int, MultipathRecord]] = []
    rejects: list[RowReject] = []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        tx = row[0].strip() if row else None
        rx = None
        try:
            if len(row) != len(CSV_COLUMNS):
                raise ParseError(f"parse error at line {lineno}", lineno)
            try:
                rx = int(row[1])
            except ValueError:
                raise ParseError(f"parse error at line {lineno}", lineno) from None
            rec = _record_from_fields(lineno, *row[2:])
        except ParseError as exc:
            rejects.append(RowReject(lineno, str(exc), tx, rx))
            continue
        good.append((tx, rx, rec))
    return _group(good), rejects


def parse_paths_csv(stream: TextIO) -> list[PathDataset]:
    """Strict canonical-CSV reader: the first malformed row raises."""
    datasets, rejects = read_paths_csv(stream)
    if rejects:
        first = rejects[0]
        raise ParseError(first.reason, first.line)
    return datasets


def write_paths_csv(datasets: Iterable[PathDataset], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for ds in datasets:
        for r in ds.records:
            writer.writerow(
                [ds.transmitter_id, ds.receiver_id, r.path_id, repr(r.toa_s), repr(r.power_dbm), repr(r.phase_deg)]
            )


def dumps_paths_csv(datasets: Iterable[PathDataset]) -> str:
    buf = io.StringIO()
    write_paths_csv(datasets, buf)
    return buf.getvalue()


def parse_insite_cir(
    stream: TextIO,
    receiver_id: int | None = None,
    transmitter_id: str | None = None,
) -> list[PathDataset]:
    """
    Best-effort reader for whitespace-delimited complex impulse response
    exports.

    Lines starting with ``#`` are comments, except for three directives::

        # transmitter: Tx1
        # receiver: 484
        # columns: path=1 toa_s=2 power_dbm=3 phase_deg=4

    Column positions are 1-based and must be declared before the first data
    row. A ``receiver`` directive starts a new dataset; ``receiver_id`` and
    ``transmitter_id`` arguments provide defaults when the file has none.
    Columns beyond the declared ones are ignored.
    """
    layout: dict[str, int] | None = None
    tx = transmitter_id if transmitter_id is not None else "tx"
    rx = receiver_id
    rows: list[tuple[str, int, MultipathRecord]] = []

    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line.lstrip("#").partition(":")
            key = key.strip().lower()
            if not sep:
                continue
            value = value.strip()
            if key == "columns":
                layout = _parse_layout(value, lineno)
            elif key == "receiver":
                try:
                    rx = int(value)
                except ValueError:
                    raise ParseError(f"parse error at line {lineno}", lineno) from None
            elif key == "transmitter":
                tx = value
            continue
        if layout is None:
            raise ParseError("unknown layout", lineno)
        if rx is None:
            raise ParseError(f"no receiver id before line {lineno}", lineno)
        cols = line.split()
        if len(cols) <= max(layout.values()):
            raise ParseError(f"parse error at line {lineno}", lineno)
        rec = _record_from_fields(lineno, *(cols[layout[k]] for k in _INSITE_KEYS))
        rows.append((tx, rx, rec))

    if layout is None:
        raise ParseError("unknown layout")
    return _group(rows)


def _parse_layout(text: str, lineno: int) -> dict[str, int]:
    layout = {}
    for item in text.split():
        key, eq, pos = item.partition("=")
        if not eq:
            raise ParseError("unknown layout", lineno)
        try:
            layout[key.strip()] = int(pos) - 1
        except ValueError:
            raise ParseError("unknown layout", lineno) from None
    if any(k not in layout for k in _INSITE_KEYS) or min(layout.values()) < 0:
        raise ParseError("unknown layout", lineno)
    return layout


# --- synthetic data -------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Parameters of an exponentially decaying random multipath set.

    The first path always arrives at ``first_arrival_s`` with exactly
    ``base_power_dbm``; the rest get uniform excess delays on
    ``[0, max_excess_ns]`` and powers on the exponential envelope plus a
    uniform ripple of at most ``ripple_db``.
    """

    n_paths: int
    decay_constant_ns: float
    max_excess_ns: float
    base_power_dbm: float
    seed: int
    ripple_db: float = 1.0
    first_arrival_s: float = 2.2e-7
    receiver_id: int = 0
    transmitter_id: str = "synthetic"

    def validate(self) -> None:
        ok = (
            isinstance(self.n_paths, (int, np.integer))
            and self.n_paths >= 1
            and self.decay_constant_ns > 0
            and self.max_excess_ns > 0
            and self.ripple_db >= 0
            and self.first_arrival_s >= 0
            and all(
                math.isfinite(x)
                for x in (self.decay_constant_ns, self.max_excess_ns, self.base_power_dbm, self.ripple_db, self.first_arrival_s)
            )
        )
        if not ok:
            raise PdpError("invalid spec")


def generate_synthetic(spec: SyntheticSpec) -> PathDataset:
    spec.validate()
    # explicit bit generator so output does not depend on numpy's default
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = int(spec.n_paths)
    excess = np.concatenate([[0.0], np.sort(rng.uniform(0.0, spec.max_excess_ns, n - 1))])
    ripple = np.concatenate([[0.0], rng.uniform(-spec.ripple_db, spec.ripple_db, n - 1)])
    phase = rng.uniform(0.0, 360.0, n)
    power = spec.base_power_dbm - 10.0 * (excess / spec.decay_constant_ns) * math.log10(math.e) + ripple
    toa = spec.first_arrival_s + excess * 1e-9
    records = tuple(
        MultipathRecord(i + 1, float(t), float(p), float(ph))
        for i, (t, p, ph) in enumerate(zip(toa, power, phase))
    )
    return PathDataset(spec.receiver_id, spec.transmitter_id, records)
