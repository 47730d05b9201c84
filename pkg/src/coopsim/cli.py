"""Command-line entry point: ``simulate``, ``analyze``, ``spectrum`` and ``diversity``.

Settings come from an optional TOML file (a ``[campaign]`` table) and are
overridden by flags.  Every CSV starts with the effective settings as ``#``
comment lines.  Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import tomli

from . import analysis
from .channel import build_link_budget
from .codes import CodeSpec, build_compound_code, compute_compound_spectrum, compute_distance_spectrum
from .driver import (AnalyticRecord, CampaignConfig, default_workers, group_curves, read_records_csv,
                     records_to_csv, run_campaign)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
ANALYTIC_SCHEMES = ("PARC", "NCC", "UNCODED")

_SNR_ITEM = {"oneOf": [{"type": "string"}, {"type": "array", "items": {"type": "number"}, "minItems": 1}]}

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "campaign": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "schemes": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "codes": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "n_relays": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "snr_db": _SNR_ITEM,
                "k": {"type": "integer", "minimum": 1},
                "min_bit_errors": {"type": "integer", "minimum": 1},
                "max_packets": {"type": "integer", "minimum": 1},
                "min_error_packets": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "pathloss_exponent": {"type": "number", "minimum": 0},
                "relay_position": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "ncc_scaling": {"type": "boolean"},
                "exact": {"type": "boolean"},
                "ber_floor": {"type": "number", "exclusiveMinimum": 0},
                "workers": {"type": "integer", "minimum": 1},
                "d_max": {"type": "integer", "minimum": 1},
            },
        },
    },
}

DEFAULTS: dict[str, Any] = {
    "schemes": ["PARC"],
    "codes": ["133,165,171"],
    "n_relays": [2],
    "snr_db": "0:2:20",
}


class ConfigError(Exception):
    pass


def parse_snr_grid(spec: str | Sequence[float]) -> list[float]:
    """``"start:step:stop"`` (stop included) or an explicit list, in dB."""
    if not isinstance(spec, str):
        return [float(x) for x in spec]
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(x) for x in spec.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"SNR grid {spec!r} is not start:step:stop")
    try:
        start, step, stop = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"SNR grid {spec!r} has non-numeric parts") from None
    if not step > 0 or stop < start:
        raise ConfigError(f"SNR grid {spec!r} needs step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    p = Path(path)
    try:
        raw = tomli.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    validate_config(raw)
    return dict(raw.get("campaign", {}))


def validate_config(raw: dict) -> None:
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        lines = [f"{'.'.join(str(x) for x in e.path) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


def effective_settings(args: argparse.Namespace) -> dict[str, Any]:
    cfg = dict(DEFAULTS)
    cfg.update(load_config(args.config))
    flags = {
        "schemes": [s for v in args.scheme or [] for s in v.split(",") if s] or None,
        "codes": args.code,
        "n_relays": [int(n) for v in args.relays or [] for n in v.split(",")] or None,
        "snr_db": args.snr,
        "k": args.k,
        "min_bit_errors": getattr(args, "min_errors", None),
        "max_packets": getattr(args, "max_packets", None),
        "min_error_packets": getattr(args, "min_error_packets", None),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "d_max": getattr(args, "d_max", None),
    }
    cfg.update({k: v for k, v in flags.items() if v is not None})
    validate_config({"campaign": cfg})
    return cfg


def campaign_from(settings: dict[str, Any]) -> CampaignConfig:
    kw = {k: v for k, v in settings.items() if k not in ("workers", "d_max")}
    kw["snr_db"] = parse_snr_grid(kw["snr_db"])
    try:
        return CampaignConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def settings_header(command: str, settings: dict[str, Any]) -> list[str]:
    lines = [f"command = {command}"]
    for k in sorted(settings):
        v = settings[k]
        lines.append(f"{k} = {v!r}" if not isinstance(v, list) else f"{k} = {', '.join(map(str, v))}")
    return lines


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# -- subcommands ------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    settings = effective_settings(args)
    cfg = campaign_from(settings)
    workers = settings.get("workers") or default_workers()
    result = run_campaign(cfg, workers)
    _emit(records_to_csv(result.records, args.timing, settings_header("simulate", settings)), args.output)
    for f in result.failures:
        print(f"error: cell {f.scheme} {f.code} N_r={f.n_relays} {f.snr_db:g} dB failed: {f.error}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_RUNTIME


def analytic_curve(scheme: str, code: str, n_relays: int, snr_grid: Sequence[float], k: int,
                   pathloss_exponent: float = 3.5, relay_position: float = 0.5,
                   d_max: int | None = None) -> list[AnalyticRecord]:
    """Union-bound BER (source 1) on the simulation grid."""
    spec = CodeSpec.from_octal(code)
    if scheme == "PARC":
        dist = compute_distance_spectrum(spec, d_max)
    elif scheme == "NCC":
        dist = compute_compound_spectrum(build_compound_code(spec), d_max)
    elif scheme != "UNCODED":
        raise ConfigError(f"no analytic curve for scheme {scheme}; choose from {ANALYTIC_SCHEMES}")
    out = []
    for snr in snr_grid:
        budget = build_link_budget(snr, n_relays, pathloss_exponent, relay_position)
        if scheme == "PARC":
            ber = analysis.ber_bound_parc(dist, budget, spec.codeword_length(k)).total
        elif scheme == "NCC":
            ber = analysis.ber_bound_ncc(dist, budget).total
        else:
            ber = analysis.rayleigh_pep(float(budget.sd[0]))
        out.append(AnalyticRecord(scheme, spec.name, n_relays, snr, 0, 0, 0, value=ber))
    return out


def diversity_rows(records) -> list[tuple[str, str, int, float, float]]:
    rows = []
    for (scheme, code, nr), pts in group_curves(records).items():
        curve = [(r.snr_db, r.ber) for r in pts if r.ber > 0]
        if len(curve) < 3:
            continue
        rows.extend((scheme, code, nr, s, z) for s, z in analysis.instantaneous_diversity(curve))
    return rows


def diversity_csv(rows, header: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("scheme", "code", "n_relays", "snr_db", "diversity"))
    for scheme, code, nr, s, z in rows:
        w.writerow([scheme, code, nr, f"{s:g}", f"{z:.6f}"])
    return buf.getvalue()


def cmd_analyze(args: argparse.Namespace) -> int:
    settings = effective_settings(args)
    cfg = campaign_from(settings)
    bad = [s for s in cfg.schemes if s not in ANALYTIC_SCHEMES]
    if bad:
        raise ConfigError(f"no analytic curve for {bad}; choose from {ANALYTIC_SCHEMES}")
    records = []
    try:
        for scheme, code, nr in cfg.curves():
            records.extend(analytic_curve(scheme, code, nr, cfg.snr_db, cfg.k, cfg.pathloss_exponent,
                                          cfg.relay_position, settings.get("d_max")))
    except ValueError as exc:
        print(f"error: analysis failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    header = settings_header("analyze", settings)
    _emit(records_to_csv(records, header=header), args.output)
    if args.diversity_output:
        Path(args.diversity_output).write_text(diversity_csv(diversity_rows(records), header))
    return EXIT_OK


def cmd_spectrum(args: argparse.Namespace) -> int:
    try:
        spec = CodeSpec.from_octal(args.code)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    header = ["command = spectrum", f"code = {spec.name}", f"compound = {args.compound}"]
    try:
        if args.compound:
            s = compute_compound_spectrum(build_compound_code(spec), args.d_max)
            header += [f"F = {s.F}", f"f = {s.f}", f"d_max = {s.d_max}"]
        else:
            s = compute_distance_spectrum(spec, args.d_max)
            header += [f"f = {s.f}", f"d_max = {s.d_max}"]
    except (ValueError, RuntimeError) as exc:
        print(f"error: spectrum search failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _emit("".join(f"# {h}\n" for h in header) + s.to_csv(), args.output)
    return EXIT_OK


def cmd_diversity(args: argparse.Namespace) -> int:
    try:
        text = Path(args.input).read_text() if args.input != "-" else sys.stdin.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.input}: {exc}") from None
    try:
        records = read_records_csv(text)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"malformed BER CSV: {exc}") from None
    try:
        rows = diversity_rows(records)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _emit(diversity_csv(rows, ["command = diversity", f"input = {args.input}"]), args.output)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def _grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with a [campaign] table")
    p.add_argument("--scheme", action="append", help="scheme(s), comma separated: PARC, NCC, REF1, REF2, DIRECT, UNCODED")
    p.add_argument("--code", action="append", help="octal generators, e.g. 133,165,171 (repeat for more codes)")
    p.add_argument("--relays", action="append", help="relay count(s), comma separated")
    p.add_argument("--snr", help="SNR grid in dB, start:step:stop or a comma list")
    p.add_argument("--k", type=int, help="information bits per packet")
    p.add_argument("-o", "--output", help="output CSV (default stdout)")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are configuration errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="coopsim", description="Cooperative relaying BER simulator and analysis")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="Monte Carlo BER campaign")
    _grid_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--min-errors", type=int, dest="min_errors")
    p.add_argument("--max-packets", type=int, dest="max_packets")
    p.add_argument("--min-error-packets", type=int, dest="min_error_packets",
                   help="also require this many packets with errors before stopping")
    p.add_argument("--workers", type=int, help="worker processes (default from COOPSIM_WORKERS, else 1)")
    p.add_argument("--timing", action="store_true", help="write wall-clock seconds (breaks byte-identical reruns)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="analytic BER bounds on the simulation grid")
    _grid_flags(p)
    p.add_argument("--d-max", type=int, dest="d_max", help="spectrum truncation weight")
    p.add_argument("--diversity-output", help="also write instantaneous diversity of each curve here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("spectrum", help="distance spectrum of a code or its compound code")
    p.add_argument("--code", required=True)
    p.add_argument("--d-max", type=int, dest="d_max")
    p.add_argument("--compound", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("diversity", help="instantaneous diversity of the curves in a BER CSV")
    p.add_argument("input", help="BER CSV from simulate or analyze ('-' for stdin)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_diversity)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
