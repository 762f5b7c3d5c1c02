"""
Batch runner and report writers.

A batch reads canonical path CSVs, builds one thresholded PDP per
(transmitter, receiver), computes its delay metrics and its KL divergence
against the TDL preset(s) of the transmitter's scenario, and writes:

``report.csv``
    One row per receiver, numbers at 5 significant digits.
``report.json``
    Same rows plus per-column min/median/max and the list of failures.
``run_metadata.json``
    Timestamp, package version and the resolved config. Kept out of the
    data files so that reruns produce byte-identical reports.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import statistics
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from . import __version__
from .divergence import DEFAULT_EPSILON, DEFAULT_STEP_NS, ResampleMethod, compare
from .ingest import PathDataset, read_paths_csv
from .metrics import MeanMode, effective_max_delay, mean_excess_delay, rms_delay_spread
from .pdp import (
    DEFAULT_BIN_WIDTH_NS,
    DEFAULT_THRESHOLD_DB,
    Combine,
    PdpError,
    PowerDelayProfile,
    build_profile,
    normalize_to_peak,
    process_profile,
)
from .tdl import Scenario, TdlModel, preset_profile

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "PDPCOMPARE_OUTPUT_DIR"
SIG_DIGITS = 5

REPORT_COLUMNS = (
    "tx_id",
    "rx_id",
    "scenario",
    "rms_ns",
    "mean_weighted_ns",
    "mean_unweighted_ns",
    "max_ns",
    "tap_count",
    "kl_tdl_a_bits",
    "kl_tdl_b_bits",
    "kl_tdl_c_bits",
    "grid_step_ns",
    "epsilon",
)
NUMERIC_COLUMNS = REPORT_COLUMNS[3:11]
_KL_COLUMN = {
    TdlModel.TDL_A: "kl_tdl_a_bits",
    TdlModel.TDL_B: "kl_tdl_b_bits",
    TdlModel.TDL_C: "kl_tdl_c_bits",
}


class ConfigError(PdpError):
    pass


def fmt(x) -> str:
    """Format a number at 5 significant digits; ``None`` becomes empty."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.{SIG_DIGITS}g}"


@dataclass
class BatchConfig:
    inputs: list[Path]
    scenarios: dict[str, Scenario] = field(default_factory=dict)
    default_scenario: Scenario | None = None
    models: tuple[TdlModel, ...] = (TdlModel.TDL_A, TdlModel.TDL_B, TdlModel.TDL_C)
    threshold_db: float = DEFAULT_THRESHOLD_DB
    bin_width_ns: float = DEFAULT_BIN_WIDTH_NS
    combine: Combine = Combine.NONCOHERENT
    mean_mode: MeanMode = MeanMode.POWER_WEIGHTED
    kl_step_ns: float = DEFAULT_STEP_NS
    epsilon: float = DEFAULT_EPSILON
    kl_method: ResampleMethod = ResampleMethod.BIN_ACCUMULATE
    reverse_kl: bool = False
    output_dir: Path = Path("pdp_report")

    def __post_init__(self):
        self.inputs = [Path(p) for p in self.inputs]
        self.scenarios = {str(k): Scenario.parse(v) for k, v in self.scenarios.items()}
        if self.default_scenario is not None:
            self.default_scenario = Scenario.parse(self.default_scenario)
        try:
            self.models = tuple(dict.fromkeys(TdlModel.parse(m) for m in self.models))
        except PdpError as exc:
            raise ConfigError(str(exc)) from None
        self.combine = Combine(self.combine)
        self.mean_mode = MeanMode(self.mean_mode)
        self.kl_method = ResampleMethod(self.kl_method)
        self.output_dir = Path(self.output_dir)
        self.validate()

    def validate(self) -> None:
        if not self.models:
            raise ConfigError("models must be non-empty")
        if not (self.threshold_db < 0 and math.isfinite(self.threshold_db)):
            raise ConfigError("threshold_db must be negative")
        if not self.bin_width_ns > 0:
            raise ConfigError("bin_width_ns must be positive")
        if not self.kl_step_ns > 0:
            raise ConfigError("kl_step_ns must be positive")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")

    def scenario_for(self, tx_id: str) -> Scenario:
        if tx_id in self.scenarios:
            return self.scenarios[tx_id]
        if self.default_scenario is not None:
            return self.default_scenario
        raise ConfigError(f"no scenario configured for transmitter {tx_id!r}")

    @classmethod
    def from_mapping(cls, data: dict, base_dir: Path | None = None) -> "BatchConfig":
        """Build from a parsed JSON object; relative paths resolve against ``base_dir``."""
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "inputs" not in data:
            raise ConfigError("config needs 'inputs'")
        if base_dir is not None:
            data["inputs"] = [base_dir / p for p in data["inputs"]]
            if "output_dir" in data:
                data["output_dir"] = base_dir / data["output_dir"]
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: Path) -> "BatchConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_mapping(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        return {
            "inputs": [str(p) for p in self.inputs],
            "scenarios": {k: v.value for k, v in sorted(self.scenarios.items())},
            "default_scenario": None if self.default_scenario is None else self.default_scenario.value,
            "models": [m.value for m in self.models],
            "threshold_db": self.threshold_db,
            "bin_width_ns": self.bin_width_ns,
            "combine": self.combine.value,
            "mean_mode": self.mean_mode.value,
            "kl_step_ns": self.kl_step_ns,
            "epsilon": self.epsilon,
            "kl_method": self.kl_method.value,
            "reverse_kl": self.reverse_kl,
            "output_dir": str(self.output_dir),
        }


@dataclass(frozen=True)
class ReportRow:
    tx_id: str
    rx_id: int
    scenario: str
    rms_ns: float
    mean_weighted_ns: float
    mean_unweighted_ns: float
    max_ns: float
    tap_count: int
    kl_tdl_a_bits: float | None
    kl_tdl_b_bits: float | None
    kl_tdl_c_bits: float | None
    grid_step_ns: float
    epsilon: float

    def cells(self) -> list[str]:
        return [v if isinstance(v, str) else fmt(v) for v in (getattr(self, c) for c in REPORT_COLUMNS)]


@dataclass(frozen=True)
class Failure:
    source: str
    tx_id: str | None
    rx_id: int | None
    reason: str


@dataclass
class BatchResult:
    rows: list[ReportRow]
    failures: list[Failure]

    @property
    def exit_code(self) -> int:
        return 2 if self.failures else 0


def site_profile(dataset: PathDataset, config: BatchConfig) -> PowerDelayProfile:
    raw = build_profile(
        dataset.records,
        bin_width_ns=config.bin_width_ns,
        combine=config.combine,
        source_id=f"{dataset.transmitter_id}/rx{dataset.receiver_id}",
    )
    return process_profile(raw, config.threshold_db)


def _tdl_reference(scenario: Scenario, model: TdlModel, config: BatchConfig) -> PowerDelayProfile:
    return process_profile(preset_profile(scenario, model), config.threshold_db)


def evaluate_dataset(dataset: PathDataset, config: BatchConfig) -> ReportRow:
    scenario = config.scenario_for(dataset.transmitter_id)
    pdp = site_profile(dataset, config)
    kl = {col: None for col in _KL_COLUMN.values()}
    for model in config.models:
        tdl = _tdl_reference(scenario, model, config)
        ref, approx = (tdl, pdp) if config.reverse_kl else (pdp, tdl)
        res = compare(ref, approx, step_ns=config.kl_step_ns, epsilon=config.epsilon, method=config.kl_method)
        kl[_KL_COLUMN[model]] = res.bits
    return ReportRow(
        tx_id=dataset.transmitter_id,
        rx_id=dataset.receiver_id,
        scenario=scenario.value,
        rms_ns=rms_delay_spread(pdp, MeanMode.POWER_WEIGHTED),
        mean_weighted_ns=mean_excess_delay(pdp, MeanMode.POWER_WEIGHTED),
        mean_unweighted_ns=mean_excess_delay(pdp, MeanMode.UNWEIGHTED),
        max_ns=effective_max_delay(pdp, config.threshold_db),
        tap_count=len(pdp),
        grid_step_ns=config.kl_step_ns,
        epsilon=config.epsilon,
        **kl,
    )


def run_batch(config: BatchConfig) -> BatchResult:
    """
    Evaluate every receiver found in ``config.inputs``.

    Receivers with malformed rows, or that fail processing, are skipped and
    listed in ``failures``; the rest are reported sorted by
    ``(tx_id, rx_id)``.
    """
    failures: list[Failure] = []
    datasets: dict[tuple[str, int], tuple[str, PathDataset]] = {}
    bad_keys: set[tuple[str, int]] = set()

    for path in config.inputs:
        try:
            with open(path, encoding="utf-8", newline="") as fh:
                parsed, rejects = read_paths_csv(fh)
        except (OSError, PdpError) as exc:
            failures.append(Failure(str(path), None, None, str(exc)))
            continue
        for rej in rejects:
            failures.append(Failure(str(path), rej.tx_id, rej.rx_id, rej.reason))
            if rej.tx_id is not None and rej.rx_id is not None:
                bad_keys.add((rej.tx_id, rej.rx_id))
        for ds in parsed:
            key = (ds.transmitter_id, ds.receiver_id)
            if key in datasets:
                failures.append(Failure(str(path), *key, "duplicate receiver id"))
                bad_keys.add(key)
                continue
            datasets[key] = (str(path), ds)

    rows = []
    for key in sorted(datasets):
        source, ds = datasets[key]
        if key in bad_keys:
            log.warning("skipping %s rx %s: malformed rows", *key)
            continue
        try:
            rows.append(evaluate_dataset(ds, config))
        except PdpError as exc:
            failures.append(Failure(source, *key, str(exc)))
    failures.sort(key=lambda f: (f.source, f.tx_id or "", -1 if f.rx_id is None else f.rx_id, f.reason))
    return BatchResult(rows, failures)


def write_report_csv(rows: Sequence[ReportRow], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())


def dumps_report_csv(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    write_report_csv(rows, buf)
    return buf.getvalue()


def read_report_csv(stream: TextIO) -> list[dict]:
    """Parse a report CSV back into dicts of typed values."""
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise PdpError("bad header")
    out = []
    for rec in reader:
        row = {"tx_id": rec["tx_id"], "rx_id": int(rec["rx_id"]), "scenario": rec["scenario"]}
        for col in REPORT_COLUMNS[3:]:
            text = rec[col]
            if col == "tap_count":
                row[col] = int(text)
            else:
                row[col] = None if text == "" else float(text)
        out.append(row)
    return out


def summary_stats(rows: Sequence[ReportRow]) -> dict:
    stats = {}
    for col in NUMERIC_COLUMNS:
        vals = [getattr(r, col) for r in rows if getattr(r, col) is not None]
        if not vals:
            continue
        stats[col] = {
            "min": float(fmt(min(vals))),
            "median": float(fmt(statistics.median(vals))),
            "max": float(fmt(max(vals))),
        }
    return stats


def report_json(result: BatchResult) -> dict:
    def typed(row: ReportRow) -> dict:
        out = {}
        for col, cell in zip(REPORT_COLUMNS, row.cells()):
            if col in ("tx_id", "scenario"):
                out[col] = cell
            elif col in ("rx_id", "tap_count"):
                out[col] = int(cell)
            else:
                out[col] = None if cell == "" else float(cell)
        return out

    return {
        "columns": list(REPORT_COLUMNS),
        "rows": [typed(r) for r in result.rows],
        "summary": summary_stats(result.rows),
        "failures": [asdict(f) for f in result.failures],
    }


def resolve_output_dir(config: BatchConfig, override: Path | None = None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(OUTPUT_DIR_ENV)
    return Path(env) if env else config.output_dir


def write_batch_outputs(result: BatchResult, config: BatchConfig, out_dir: Path) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out_dir / "report.csv",
        "json": out_dir / "report.json",
        "metadata": out_dir / "run_metadata.json",
    }
    with open(paths["csv"], "w", encoding="utf-8", newline="") as fh:
        write_report_csv(result.rows, fh)
    with open(paths["json"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report_json(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    meta = {
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "config": config.to_dict(),
        "n_rows": len(result.rows),
        "n_failures": len(result.failures),
    }
    with open(paths["metadata"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


# --- figure data ------------------------------------------------------------


def plot_rows(profiles: Sequence[PowerDelayProfile], labels: Sequence[str] | None = None):
    """(label, delay_ns, rel_power_db) triples for stem plots, peak-normalized."""
    if not profiles:
        raise PdpError("no profiles")
    if labels is None:
        labels = [p.source_id or f"series{i}" for i, p in enumerate(profiles)]
    if len(labels) != len(profiles):
        raise PdpError("one label per profile required")
    rows = []
    for label, pdp in zip(labels, profiles):
        rel = normalize_to_peak(pdp)
        rows.extend((label, float(d), float(p)) for d, p in zip(rel.delays_ns, rel.powers_db))
    return rows


def write_plot_data(profiles: Sequence[PowerDelayProfile], stream: TextIO, labels: Sequence[str] | None = None) -> None:
    rows = plot_rows(profiles, labels)
    lo = min(r[1] for r in rows)
    hi = max(r[1] for r in rows)
    stream.write(f"# series={len(profiles)} delay_extent_ns={lo!r},{hi!r}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("series", "delay_ns", "rel_power_db"))
    for label, d, p in rows:
        writer.writerow((label, repr(d), repr(p)))
