"""Command-line front end: presets, strict config parsing, result files.

Config documents are JSON with keys named exactly after ExperimentConfig
fields (channel parameters nested under "channel").  Unknown keys are
fatal and reported with the line they appear on.  Presets bundle the
figure-style experiment families; each resolves to a set of named arms
sharing one base config.  Channel parameters are synthetic stand-ins
and are marked as such in emitted provenance.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .channel import ChannelConfig
from .errors import ConfigError
from .sim import (BlerRecord, ExperimentConfig, complexity_report,
                  min_storage_bits, sweep)

CSV_HEADER = "snr_db,blocks,block_errors,bler,mean_queries,mean_op_count,abandonment_rate,seed"

PRESETS = ("fig2", "fig3", "fig4", "custom")
EMIT_MODES = ("csv", "json", "both")

CHANNEL_NOTE = "channel parameters are synthetic stand-ins, not measured"


@dataclass(frozen=True)
class RunManifest:
    config_path: str | None
    output_dir: str
    preset: str
    emit: str = "csv"

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.emit not in EMIT_MODES:
            raise ConfigError(f"unknown emit mode {self.emit!r}")


def _field_map(cls):
    return {f.name: f for f in dataclasses.fields(cls)}


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _reject_unknown(doc: dict, allowed, text: str, scope: str) -> None:
    for key in doc:
        if key not in allowed:
            line = _line_of(text, key)
            where = f" (line {line})" if line else ""
            raise ConfigError(f"unknown {scope} key {key!r}{where}")


def _coerce(value, name):
    if isinstance(value, list):
        return tuple(_coerce(v, name) for v in value)
    return value


def build_config(doc: dict, base: ExperimentConfig | None = None,
                 text: str = "") -> ExperimentConfig:
    """Merge a parsed document onto a base config (strict keys)."""
    fields = _field_map(ExperimentConfig)
    _reject_unknown(doc, fields, text, "config")
    channel_doc = doc.pop("channel", None)
    base = base if base is not None else ExperimentConfig(channel=ChannelConfig())
    channel = base.channel
    if channel_doc is not None:
        ch_fields = _field_map(ChannelConfig)
        _reject_unknown(channel_doc, ch_fields, text, "channel")
        channel = dataclasses.replace(channel, **channel_doc)
    updates = {k: _coerce(v, k) for k, v in doc.items()}
    try:
        return dataclasses.replace(base, channel=channel, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str, preset: str = "custom") -> ExperimentConfig:
    """Parse a JSON config document into the resolved base config."""
    text = text.strip() or "{}"
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config document: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    if preset == "custom":
        required = ("snr_grid_db",)
        for key in required:
            if key not in doc:
                raise ConfigError(f"missing required key {key!r} in custom mode")
        return build_config(dict(doc), None, text)
    return build_config(dict(doc), preset_base(preset), text)


def preset_base(preset: str) -> ExperimentConfig:
    """The shared parameters of a preset's arms."""
    channel = ChannelConfig()
    if preset == "fig2":
        return ExperimentConfig(
            channel=channel, detector="zf", decoder="ca-scl", decode_input="psi",
            code_n=128, code_k=74, list_size=16, num_streams=4,
            snr_grid_db=tuple(range(4, 15)))
    if preset == "fig3":
        return ExperimentConfig(
            channel=channel, detector="zf", decoder="turbo", decode_input="hard",
            code_n=780, code_k=256, iterations=8, num_streams=4,
            snr_grid_db=tuple(range(-2, 9)))
    if preset == "fig4":
        return ExperimentConfig(
            channel=channel, detector="zf", decoder="ca-scl", decode_input="psi",
            code_n=128, code_k=116, list_size=16, num_streams=4,
            snr_grid_db=tuple(range(6, 17)))
    raise ConfigError(f"preset {preset!r} has no base config")


def preset_arms(preset: str, base: ExperimentConfig) -> dict:
    """Named arms (curve family) derived from the resolved base."""
    rep = dataclasses.replace
    if preset == "fig2":
        return {
            "parallel": rep(base, num_streams=4, code_n=128, code_k=74),
            "baseline": rep(base, num_streams=1, code_n=512, code_k=296),
        }
    if preset == "fig3":
        arms = {}
        for det in ("zf", "cd", "pcd"):
            for inp in ("hard", "psi"):
                arms[f"{det}-{inp}"] = rep(base, detector=det, decode_input=inp)
        arms["zf-soft"] = rep(base, detector="zf", decode_input="soft")
        return arms
    if preset == "fig4":
        return {
            "uncoded": rep(base, decoder="uncoded", decode_input="hard",
                           code_n=base.code_n, code_k=base.code_n),
            "scl-hard": rep(base, decoder="ca-scl", decode_input="hard"),
            "scl-psi": rep(base, decoder="ca-scl", decode_input="psi"),
            "scl-soft": rep(base, decoder="ca-scl", decode_input="soft"),
            "grand-hard": rep(base, decoder="grand", decode_input="hard"),
            "grand-psi": rep(base, decoder="grand", decode_input="psi"),
        }
    if preset == "custom":
        return {"custom": base}
    raise ConfigError(f"unknown preset {preset!r}")


def _format_number(x) -> str:
    if isinstance(x, bool):
        raise TypeError("no boolean record fields")
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def record_row(record: BlerRecord) -> str:
    return ",".join(_format_number(v) for v in (
        record.snr_db, record.blocks, record.block_errors, record.bler,
        record.mean_queries, record.mean_op_count, record.abandonment_rate,
        record.wall_seed))


def records_to_csv(records) -> str:
    if not records:
        raise ValueError("no records to emit")
    return "\n".join([CSV_HEADER] + [record_row(r) for r in records]) + "\n"


def records_to_json(records, config: ExperimentConfig) -> str:
    payload = {
        "notes": CHANNEL_NOTE,
        "config": dataclasses.asdict(config),
        "records": [dataclasses.asdict(r) for r in records],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def emit_results(records, manifest: RunManifest, name: str = "results",
                 config: ExperimentConfig | None = None) -> list:
    """Write CSV and/or JSON files for one arm; returns the paths."""
    if not records:
        raise ValueError("no records to emit")
    out = Path(manifest.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if manifest.emit in ("csv", "both"):
        p = out / f"{name}.csv"
        p.write_text(records_to_csv(records))
        paths.append(p)
    if manifest.emit in ("json", "both"):
        if config is None:
            raise ValueError("json emission needs the resolved config")
        p = out / f"{name}.json"
        p.write_text(records_to_json(records, config))
        paths.append(p)
    return paths


def _cmd_run(args) -> int:
    manifest = RunManifest(config_path=args.config, output_dir=args.out,
                           preset=args.preset, emit=args.emit)
    text = Path(args.config).read_text() if args.config else ""
    base = parse_config(text, preset=args.preset)
    if args.seed is not None:
        base = dataclasses.replace(base, base_seed=args.seed)
    arms = preset_arms(args.preset, base)
    for name, cfg in arms.items():
        records = sweep(cfg, workers=args.workers)
        paths = emit_results(records, manifest, name=f"{args.preset}_{name}",
                             config=cfg)
        for p in paths:
            print(p)
    return 0


def _cmd_report(args) -> int:
    baseline = parse_config(Path(args.baseline).read_text())
    variant = parse_config(Path(args.variant).read_text())
    report = complexity_report(baseline, variant, args.snr, args.blocks)
    print(json.dumps(dataclasses.asdict(report), indent=2, sort_keys=True))
    return 0


def _cmd_storage(args) -> int:
    bits = min_storage_bits(args.throughput, args.latency)
    print(_format_number(bits))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thzlink",
        description="Link-level simulator for parallel short-code THz MIMO baseband")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a preset's arms and emit results")
    run.add_argument("--preset", choices=PRESETS, required=True)
    run.add_argument("--config", default=None, help="JSON overrides (required for custom)")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--emit", choices=EMIT_MODES, default="csv")
    run.add_argument("--seed", type=int, default=None, help="base seed override")
    run.add_argument("--workers", type=int, default=1)
    run.set_defaults(func=_cmd_run)

    report = sub.add_parser("report", help="complexity comparison of two configs")
    report.add_argument("--baseline", required=True)
    report.add_argument("--variant", required=True)
    report.add_argument("--snr", type=float, default=10.0)
    report.add_argument("--blocks", type=int, default=64)
    report.set_defaults(func=_cmd_report)

    storage = sub.add_parser("storage", help="minimum in-flight storage bound")
    storage.add_argument("--throughput", type=float, required=True, help="bits per second")
    storage.add_argument("--latency", type=float, required=True, help="seconds")
    storage.set_defaults(func=_cmd_storage)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - cli boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
