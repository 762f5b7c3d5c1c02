"""Command-line entry point: ``pdpcompare {tdl,metrics,compare,batch,plot-data,synth}``.

Exit codes: 0 success, 1 usage/config/input error, 2 partial data failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .divergence import DEFAULT_EPSILON, DEFAULT_STEP_NS, ResampleMethod, compare
from .ingest import SyntheticSpec, generate_synthetic, write_paths_csv
from .metrics import MeanMode, summarize
from .pdp import DEFAULT_THRESHOLD_DB, PdpError, process_profile, read_pdp, write_pdp
from .report import (
    BatchConfig,
    ConfigError,
    resolve_output_dir,
    run_batch,
    write_batch_outputs,
    write_plot_data,
)
from .tdl import TdlModel, get_preset, scaled_profile

log = logging.getLogger("pdpcompare")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for partial failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _open_out(path):
    if path is None or str(path) == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _load_pdp(path: str):
    with open(path, encoding="utf-8") as fh:
        return read_pdp(fh)


def _tdl_profile(model: str, ds: float | None, scenario: str | None):
    if ds is None and scenario is None:
        raise PdpError("give --ds or --scenario")
    if ds is None:
        preset = get_preset(scenario, model)
        return scaled_profile(preset.model, preset.ds_ns)
    return scaled_profile(model, ds)


def _add_tdl_source(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--model", choices=["A", "B", "C"], required=required, type=str.upper)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--ds", type=float, help="desired RMS delay spread in ns")
    group.add_argument("--scenario", help="preset: umi_o2i or i2i")


def cmd_tdl(args) -> int:
    pdp = _tdl_profile(args.model, args.ds, args.scenario)
    out, close = _open_out(args.output)
    try:
        write_pdp(pdp, out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_metrics(args) -> int:
    m = summarize(_load_pdp(args.pdp), args.threshold, args.mean_mode)
    if args.json:
        print(json.dumps(m.to_dict(), indent=2, sort_keys=True))
    else:
        print(f"rms_ds_ns       {m.rms_ds_ns:.5g}")
        print(f"mean_excess_ns  {m.mean_excess_ns:.5g} ({m.mean_mode.value})")
        print(f"eff_max_ns      {m.eff_max_ns:.5g}")
        print(f"threshold_db    {m.threshold_db:g}")
        print(f"tap_count       {m.tap_count}")
    return EXIT_OK


def cmd_compare(args) -> int:
    ref = process_profile(_load_pdp(args.reference), args.threshold)
    if args.approx is not None:
        approx = _load_pdp(args.approx)
    elif args.model is not None:
        approx = _tdl_profile(args.model, args.ds, args.scenario)
    else:
        raise PdpError("give an approximation file or --model")
    approx = process_profile(approx, args.threshold)
    if args.reverse:
        ref, approx = approx, ref
    res = compare(ref, approx, step_ns=args.step, epsilon=args.epsilon, method=args.method)
    if args.json:
        print(json.dumps(res.to_dict(), indent=2, sort_keys=True))
    else:
        print(f"D_KL({res.reference_id} || {res.approx_id}) = {res.bits:.5g} bits")
        print(
            f"grid start={res.grid.start_ns:g} ns step={res.grid.step_ns:g} ns "
            f"bins={res.grid.n_bins} epsilon={res.epsilon:g} method={res.method.value}"
        )
    return EXIT_OK


def cmd_batch(args) -> int:
    if args.config is not None:
        config = BatchConfig.load(args.config)
    elif args.inputs:
        config = BatchConfig(inputs=args.inputs, default_scenario=args.scenario or None)
    else:
        raise ConfigError("give --config or input files")
    if args.models:
        config = BatchConfig.from_mapping({**_config_fields(config), "models": args.models.split(",")})
    result = run_batch(config)
    out_dir = resolve_output_dir(config, args.output_dir)
    paths = write_batch_outputs(result, config, out_dir)
    for f in result.failures:
        log.error("%s tx=%s rx=%s: %s", f.source, f.tx_id, f.rx_id, f.reason)
    print(f"{len(result.rows)} rows -> {paths['csv']}")
    if result.failures:
        print(f"{len(result.failures)} failure(s); see {paths['json']}", file=sys.stderr)
    return result.exit_code


def _config_fields(config: BatchConfig) -> dict:
    return {name: getattr(config, name) for name in config.__dataclass_fields__}


def cmd_plot_data(args) -> int:
    profiles = [_load_pdp(p) for p in args.pdp]
    labels = args.labels.split(",") if args.labels else None
    out, close = _open_out(args.output)
    try:
        write_plot_data(profiles, out, labels)
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_synth(args) -> int:
    datasets = []
    for i in range(args.receivers):
        spec = SyntheticSpec(
            n_paths=args.paths,
            decay_constant_ns=args.decay,
            max_excess_ns=args.max_excess,
            base_power_dbm=args.base_power,
            seed=args.seed + i,
            receiver_id=i + 1,
            transmitter_id=args.tx,
        )
        datasets.append(generate_synthetic(spec))
    out, close = _open_out(args.output)
    try:
        write_paths_csv(datasets, out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdpcompare", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tdl", help="emit a delay-scaled TDL profile")
    _add_tdl_source(p, required=True)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_tdl)

    p = sub.add_parser("metrics", help="delay metrics of a profile file")
    p.add_argument("pdp")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD_DB)
    p.add_argument("--mean-mode", choices=[m.value for m in MeanMode], default=MeanMode.POWER_WEIGHTED.value)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("compare", help="KL divergence (bits) of an approximation from a reference")
    p.add_argument("reference")
    p.add_argument("approx", nargs="?")
    _add_tdl_source(p, required=False)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD_DB)
    p.add_argument("--step", type=float, default=DEFAULT_STEP_NS)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--method", choices=[m.value for m in ResampleMethod], default=ResampleMethod.BIN_ACCUMULATE.value)
    p.add_argument("--reverse", action="store_true", help="swap reference and approximation")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("batch", help="per-receiver report from path CSVs")
    p.add_argument("inputs", nargs="*", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--scenario", help="scenario for every transmitter when no config is given")
    p.add_argument("--models", help="comma list, e.g. A,B,C")
    p.add_argument("--output-dir", type=Path, default=None)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("plot-data", help="stem-plot data for one or more profiles")
    p.add_argument("pdp", nargs="+")
    p.add_argument("--labels", help="comma-separated series labels")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("synth", help="write a seeded synthetic path CSV")
    p.add_argument("--receivers", type=int, default=5)
    p.add_argument("--paths", type=int, default=40)
    p.add_argument("--decay", type=float, default=50.0, help="decay constant, ns")
    p.add_argument("--max-excess", type=float, default=400.0, help="ns")
    p.add_argument("--base-power", type=float, default=-70.0, help="dBm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tx", default="Tx1")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (PdpError, OSError) as exc:
        print(f"pdpcompare: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
