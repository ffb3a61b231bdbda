"""Command-line front end.

Subcommands: write-sim, herald, retrieve, protocol, sweep, preset-list.
Exit codes: 0 ok, 2 config or usage error, 3 no success within max_trials,
4 numeric failure.  Every output file embeds the resolved configuration,
its provenance tags, and the master seed, so rerunning from the embedded
config reproduces the output byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import config as cfg_mod
from . import herald as herald_mod
from . import hilbert
from . import retrieval as retrieval_mod
from . import write_dynamics as wd
from .config import ConfigError, ResolvedConfig
from .protocol import ProtocolEngine, ProtocolStats, aggregate, run_protocol

STATS_COLUMNS = (
    "n_runs",
    "n_trials",
    "n_success",
    "p_click",
    "p_click_stderr",
    "p_click_analytic",
    "mean_trials",
    "mean_trials_stderr",
    "false_herald_fraction",
    "false_herald_analytic",
    "mean_concurrence",
    "concurrence_stderr",
    "mean_fidelity_bell",
    "fidelity_stderr",
    "photon_yield",
)


def _complex_pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _metadata(command: str, cfg: ResolvedConfig, seed: int) -> dict:
    return {
        "tool": "fmesim",
        "command": command,
        "seed": seed,
        "preset": cfg.preset,
        "config": cfg.serializable_values(),
        "provenance": {k: cfg.provenance[k] for k in sorted(cfg.provenance)},
    }


def _write_text(out_path: str | None, text: str) -> None:
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _json_safe(value):
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def _emit_json(out_path: str | None, payload: dict) -> None:
    _write_text(out_path, json.dumps(payload, indent=2) + "\n")


def _stats_row(stats: ProtocolStats, engine: ProtocolEngine) -> dict:
    return {
        "n_runs": stats.n_runs,
        "n_trials": stats.n_trials,
        "n_success": stats.n_success,
        "p_click": stats.p_click_per_trial,
        "p_click_stderr": stats.p_click_stderr,
        "p_click_analytic": engine.p_click,
        "mean_trials": stats.mean_trials_to_success,
        "mean_trials_stderr": stats.mean_trials_stderr,
        "false_herald_fraction": stats.false_herald_fraction,
        "false_herald_analytic": engine.false_fraction,
        "mean_concurrence": stats.mean_concurrence,
        "concurrence_stderr": stats.concurrence_stderr,
        "mean_fidelity_bell": stats.mean_fidelity_bell,
        "fidelity_stderr": stats.fidelity_stderr,
        "photon_yield": stats.photon_yield,
    }


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return json.dumps(value)
    return str(value)


def _emit_rows_csv(
    out_path: str | None, command: str, cfg: ResolvedConfig, seed: int,
    rows: list[tuple[ResolvedConfig, dict]],
) -> None:
    buf = io.StringIO()
    meta = _metadata(command, cfg, seed)
    buf.write(f"# fmesim {command}\n")
    buf.write(f"# seed: {seed}\n")
    buf.write("# config: " + json.dumps(meta["config"], sort_keys=True) + "\n")
    buf.write("# provenance: " + json.dumps(meta["provenance"], sort_keys=True) + "\n")
    config_keys = sorted(cfg.values)
    header = ["row"] + config_keys + list(STATS_COLUMNS)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i, (row_cfg, stats_dict) in enumerate(rows):
        row_values = row_cfg.serializable_values()
        cells = [str(i)]
        cells += [_format_cell(row_values[k]) for k in config_keys]
        cells += [_format_cell(stats_dict[k]) for k in STATS_COLUMNS]
        writer.writerow(cells)
    _write_text(out_path, buf.getvalue())


def _emit_rows_json(
    out_path: str | None, command: str, cfg: ResolvedConfig, seed: int,
    rows: list[tuple[ResolvedConfig, dict]],
) -> None:
    payload = {"metadata": _metadata(command, cfg, seed), "results": []}
    for i, (row_cfg, stats_dict) in enumerate(rows):
        entry = {"row": i, "config": row_cfg.serializable_values()}
        entry.update({k: _json_safe(v) for k, v in stats_dict.items()})
        payload["results"].append(entry)
    _emit_json(out_path, payload)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_preset_list(args) -> int:
    lines = []
    for name in sorted(cfg_mod.PRESETS):
        preset = cfg_mod.PRESETS[name]
        lines.append(f"preset {name}")
        lines.append(f"  {preset.description}")
        for label in preset.level_labels:
            lines.append(f"  {label}")
        for key in sorted(preset.values):
            spec = cfg_mod.SCHEMA[key]
            value = preset.values[key]
            unit = f" {spec.unit}" if spec.unit else ""
            lines.append(
                f"  {key} = {_format_cell(value)}{unit} [{preset.provenance[key]}]"
                f"  {spec.description}"
            )
        lines.append("")
    lines.append("package defaults (apply when neither preset nor config sets a key)")
    for key in sorted(cfg_mod.DEFAULTS):
        spec = cfg_mod.SCHEMA[key]
        unit = f" {spec.unit}" if spec.unit else ""
        lines.append(
            f"  {key} = {_format_cell(cfg_mod.DEFAULTS[key])}{unit} [default]"
            f"  {spec.description}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _load(args) -> ResolvedConfig:
    cfg = cfg_mod.load_config(path=args.config, preset=args.preset, overrides=args.set)
    if getattr(args, "runs", None) is not None:
        cfg = cfg_mod.with_overrides(cfg, {"runs": args.runs})
    return cfg


def _engine(cfg: ResolvedConfig) -> ProtocolEngine:
    return ProtocolEngine(cfg_mod.build_setup(cfg))


def _state_payload(state) -> dict:
    return json.loads(hilbert.to_json(state))


def cmd_write_sim(args) -> int:
    cfg = _load(args)
    params = cfg_mod.build_system_params(cfg)
    rates = wd.derive_rates(params)
    engine = _engine(cfg)
    state = engine.write_state
    payload = {
        "metadata": _metadata("write-sim", cfg, args.seed),
        "engine": cfg.values["engine"],
        "derived_rates_rad_per_s": {
            "chi_I": _complex_pair(rates.chi_I),
            "chi_II": _complex_pair(rates.chi_II),
            "gamma_L_I": rates.gamma_L_I,
            "gamma_L_II": rates.gamma_L_II,
            "delta_L_I": rates.delta_L_I,
            "delta_L_II": rates.delta_L_II,
            "P_I": _complex_pair(rates.P_I),
            "P_II": _complex_pair(rates.P_II),
        },
        "write_state": _state_payload(state),
        "expected_occupation": {
            "photon": hilbert.expected_occupation(state, hilbert.Mode.STOKES),
            "spin_I": hilbert.expected_occupation(state, hilbert.Mode.SPIN_I),
            "spin_II": hilbert.expected_occupation(state, hilbert.Mode.SPIN_II),
        },
    }
    _emit_json(args.out, payload)
    return 0


def cmd_herald(args) -> int:
    cfg = _load(args)
    engine = _engine(cfg)
    det = cfg_mod.build_detector(cfg)
    single = next(
        (b for b in engine.branches if b.kind == "photon" and b.n_photons == 1), None
    )
    payload = {
        "metadata": _metadata("herald", cfg, args.seed),
        "p_click": engine.p_click,
        "p_dark": det.p_dark,
        "false_herald_fraction": engine.false_fraction,
        "branches": [
            {"kind": b.kind, "n_photons": b.n_photons, "probability": b.probability}
            for b in engine.branches
        ],
        "conditional_state_single_photon": (
            _state_payload(single.state) if single is not None else None
        ),
    }
    _emit_json(args.out, payload)
    return 0


def cmd_retrieve(args) -> int:
    cfg = _load(args)
    engine = _engine(cfg)
    idx = next(
        (
            i
            for i, b in enumerate(engine.branches)
            if b.kind == "photon" and b.n_photons == 1
        ),
        None,
    )
    if idx is None:
        raise ConfigError("the write state has no single-photon herald branch")
    qubit = engine.outputs[idx]
    payload = {
        "c1": _complex_pair(qubit.c1),
        "c2": _complex_pair(qubit.c2),
        "omega_I_hz": qubit.omega_I / cfg_mod.TWO_PI,
        "omega_II_hz": qubit.omega_II / cfg_mod.TWO_PI,
        "concurrence": retrieval_mod.concurrence(qubit),
        "fidelity_bell": retrieval_mod.fidelity_to_bell(qubit),
        "retrieval_efficiency": qubit.retrieval_efficiency,
        "metadata": _metadata("retrieve", cfg, args.seed),
    }
    _emit_json(args.out, payload)
    return 0


def _progress(label: str):
    def write(done, total):
        print(f"{label}: {done}/{total} runs", file=sys.stderr)

    return write


def cmd_protocol(args) -> int:
    cfg = _load(args)
    setup = cfg_mod.build_setup(cfg)
    engine = ProtocolEngine(setup)
    records = run_protocol(
        setup, args.seed, cfg.values["runs"], row=0, workers=args.workers,
        progress=_progress("protocol"),
    )
    stats = aggregate(records)
    rows = [(cfg, _stats_row(stats, engine))]
    if args.format == "json":
        _emit_rows_json(args.out, "protocol", cfg, args.seed, rows)
    else:
        _emit_rows_csv(args.out, "protocol", cfg, args.seed, rows)
    return 3 if stats.n_success == 0 else 0


def _parse_sweep_axis(text: str) -> tuple[str, list]:
    if "=" not in text:
        raise ConfigError(f"--sweep expects KEY=V1,V2,... got {text!r}")
    key, raw = text.split("=", 1)
    key = key.strip()
    raw = raw.strip()
    if raw.startswith("["):
        try:
            values = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--sweep {key}: invalid JSON list: {exc}") from exc
        if not isinstance(values, list) or not values:
            raise ConfigError(f"--sweep {key}: expected a nonempty JSON list")
    else:
        parts = [p for p in raw.split(",") if p != ""]
        if not parts:
            raise ConfigError(f"--sweep {key}: no values given")
        values = []
        for part in parts:
            try:
                values.append(json.loads(part))
            except json.JSONDecodeError:
                values.append(part)
    return key, values


def cmd_sweep(args) -> int:
    cfg = _load(args)
    axes = [_parse_sweep_axis(text) for text in args.sweep]
    if not axes:
        raise ConfigError("sweep requires at least one --sweep KEY=V1,V2,...")
    points: list[dict] = [{}]
    for key, values in axes:
        points = [dict(p, **{key: v}) for p in points for v in values]
    rows = []
    for i, point in enumerate(points):
        row_cfg = cfg_mod.with_overrides(cfg, point)
        setup = cfg_mod.build_setup(row_cfg)
        engine = ProtocolEngine(setup)
        records = run_protocol(
            setup, args.seed, row_cfg.values["runs"], row=i, workers=args.workers,
            progress=_progress(f"sweep row {i + 1}/{len(points)}"),
        )
        stats = aggregate(records)
        rows.append((row_cfg, _stats_row(stats, engine)))
    if args.format == "json":
        _emit_rows_json(args.out, "sweep", cfg, args.seed, rows)
    else:
        _emit_rows_csv(args.out, "sweep", cfg, args.seed, rows)
    return 0


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmesim",
        description=(
            "Simulator of a heralded frequency-multiplexed entangled "
            "single-photon source (two-species atomic ensemble)."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--preset", metavar="NAME", help="named parameter preset")
    common.add_argument(
        "--set",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        help="override one configuration key (repeatable)",
    )
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", metavar="PATH", help="output file (default stdout)")

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--runs", type=int, default=None, help="Monte Carlo run count")
    mc.add_argument(
        "--workers", type=int, default=1,
        help="worker processes (never changes results)",
    )
    mc.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="output format"
    )

    sub.add_parser(
        "write-sim", parents=[common],
        help="write-stage state, derived rates, occupations (JSON)",
    ).set_defaults(func=cmd_write_sim)
    sub.add_parser(
        "herald", parents=[common],
        help="click probability, branch table, conditional state (JSON)",
    ).set_defaults(func=cmd_herald)
    sub.add_parser(
        "retrieve", parents=[common],
        help="output frequency-qubit record for a true herald (JSON)",
    ).set_defaults(func=cmd_retrieve)
    sub.add_parser(
        "protocol", parents=[common, mc],
        help="repeat-until-success Monte Carlo statistics",
    ).set_defaults(func=cmd_protocol)
    sweep_p = sub.add_parser(
        "sweep", parents=[common, mc],
        help="Monte Carlo statistics over a parameter grid",
    )
    sweep_p.add_argument(
        "--sweep",
        metavar="KEY=V1,V2,...",
        action="append",
        default=[],
        help="sweep axis (repeatable; axes combine as a grid)",
    )
    sweep_p.set_defaults(func=cmd_sweep)
    preset_p = sub.add_parser(
        "preset-list", parents=[common],
        help="list presets and defaults with provenance flags",
    )
    preset_p.set_defaults(func=cmd_preset_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except np.linalg.LinAlgError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
