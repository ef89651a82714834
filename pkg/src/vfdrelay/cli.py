"""Batch front end: flat config files, flag overrides, result files.

Precedence, lowest to highest: built-in defaults, config-file entries,
desk-scale shrinking, explicit command-line flags. Result files land in the
output directory as summary.json (manifest plus aggregated numbers, written
first), ber.csv (one row per scheme and SNR point), and plotdata.csv (one
BER column per scheme on the common SNR grid).

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import numerics, sim
from .nodes import PE_MODES


class ConfigError(ValueError):
    """A config file entry or flag value cannot be used."""


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key} expects a boolean, got {text!r}")


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"{key} expects an integer, got {text!r}") from None


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise ConfigError(f"{key} expects a number, got {text!r}") from None


def parse_snr_grid(text: str) -> tuple[float, ...]:
    """SNR grid grammar: START:STEP:STOP (inclusive), a comma list, or one value."""
    body = text.strip()
    if ":" in body:
        parts = body.split(":")
        if len(parts) != 3:
            raise ConfigError(f"snr range must be START:STEP:STOP, got {text!r}")
        try:
            start, step, stop = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"snr range must be numeric, got {text!r}") from None
        if step <= 0:
            raise ConfigError(f"snr step must be positive, got {step}")
        if stop < start:
            raise ConfigError(f"snr stop {stop} lies below start {start}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(count))
    try:
        values = tuple(float(p) for p in body.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"snr expects numbers, got {text!r}") from None
    if not values:
        raise ConfigError("snr grid must not be empty")
    return values


def _parse_schemes(text: str) -> tuple[str, ...]:
    body = text.strip()
    if body == "all":
        return sim.ALL_SCHEMES
    return tuple(s.strip() for s in body.split(",") if s.strip())


def _parse_pe_mode(text: str) -> str:
    body = text.strip()
    if body not in PE_MODES:
        raise ConfigError(f"pe_mode must be one of {', '.join(PE_MODES)}, got {body!r}")
    return body


# config-file key -> (ScenarioConfig field, parser taking (key, raw text))
_KEYS = {
    "location": ("relay_location", lambda k, v: v.strip()),
    "snr": ("snr_grid_db", lambda k, v: parse_snr_grid(v)),
    "frames": ("num_frames", _parse_int),
    "info_bits": ("info_bits", _parse_int),
    "antennas": ("num_antennas", _parse_int),
    "iterations": ("iterations", _parse_int),
    "decoder_iterations": ("decoder_iterations", _parse_int),
    "scheme": ("schemes", lambda k, v: _parse_schemes(v)),
    "realizations": ("realizations", _parse_int),
    "seed": ("base_seed", _parse_int),
    "pathloss_exponent": ("pathloss_exponent", _parse_float),
    "noiseless": ("noiseless", _parse_bool),
    "pe_mode": ("pe_mode", lambda k, v: _parse_pe_mode(v)),
    "posterior_feedback": ("posterior_feedback", _parse_bool),
    "workers": ("workers", _parse_int),
    "desk_scale": ("desk_scale", _parse_bool),
}


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat key = value lines; blank lines and # comments are skipped."""
    entries: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = value.strip()
    return entries


def parse_config(entries: dict[str, str],
                 base: sim.ScenarioConfig | None = None) -> sim.ScenarioConfig:
    """Apply flat config entries on top of a base configuration.

    A desk_scale entry is applied after everything else in the mapping so
    it always means the standard shrunk campaign.
    """
    config = base if base is not None else sim.ScenarioConfig()
    desk = False
    updates = {}
    for key, raw in entries.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        field, parser = _KEYS[key]
        value = parser(key, raw)
        if key == "desk_scale":
            desk = value
        else:
            updates[field] = value
    config = replace(config, **updates)
    if desk:
        config = config.desk_scaled()
    try:
        config.validate()
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return config


def config_echo(config: sim.ScenarioConfig) -> dict[str, str]:
    """Canonical flat form of a configuration; feeding it back through
    parse_config reproduces the configuration exactly."""
    echo = {
        "location": config.relay_location,
        "snr": ",".join(f"{v:g}" for v in config.snr_grid_db),
        "frames": str(config.num_frames),
        "info_bits": str(config.info_bits),
        "antennas": str(config.num_antennas),
        "iterations": str(config.iterations),
        "decoder_iterations": str(config.decoder_iterations),
        "scheme": ",".join(config.schemes),
        "realizations": str(config.realizations),
        "seed": str(config.base_seed),
        "pathloss_exponent": f"{config.pathloss_exponent:g}",
        "noiseless": "true" if config.noiseless else "false",
        "posterior_feedback": "true" if config.posterior_feedback else "false",
    }
    if config.pe_mode is not None:
        echo["pe_mode"] = config.pe_mode
    if config.workers is not None:
        echo["workers"] = str(config.workers)
    return echo


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vfdrelay",
        description="Monte Carlo BER campaigns for the two-relay "
                    "virtual full-duplex link.",
    )
    parser.add_argument("--config", metavar="PATH", help="flat key = value config file")
    parser.add_argument("--scheme", metavar="NAME",
                        help="scheme name, comma list, or 'all'")
    parser.add_argument("--location", choices=("A", "B"), help="relay geometry")
    parser.add_argument("--snr", metavar="START:STEP:STOP",
                        help="SNR grid in dB (inclusive range, list, or value)")
    parser.add_argument("--realizations", type=int, metavar="N")
    parser.add_argument("--seed", type=int, metavar="U64")
    parser.add_argument("--desk-scale", action="store_true",
                        help="run the shrunk desk campaign")
    parser.add_argument("--noiseless", action="store_true",
                        help="disable noise, for pipeline checks")
    parser.add_argument("--pe-mode", choices=PE_MODES,
                        help="override the relay error-probability feedback")
    parser.add_argument("--out", metavar="DIR", default="results",
                        help="output directory (default: results)")
    return parser


def build_config(argv: list[str] | None = None) -> tuple[sim.ScenarioConfig, Path]:
    """Merge defaults, config file, and flags into a validated configuration."""
    args = _build_parser().parse_args(argv)
    config = sim.ScenarioConfig()
    if args.config:
        config = parse_config(read_config_file(args.config), base=config)
    if args.desk_scale:
        config = config.desk_scaled()

    flag_entries: dict[str, str] = {}
    if args.scheme is not None:
        flag_entries["scheme"] = args.scheme
    if args.location is not None:
        flag_entries["location"] = args.location
    if args.snr is not None:
        flag_entries["snr"] = args.snr
    if args.realizations is not None:
        flag_entries["realizations"] = str(args.realizations)
    if args.seed is not None:
        flag_entries["seed"] = str(args.seed)
    if args.pe_mode is not None:
        flag_entries["pe_mode"] = args.pe_mode
    if args.noiseless:
        flag_entries["noiseless"] = "true"
    config = parse_config(flag_entries, base=config)
    return config, Path(args.out)


def _format_ber(value: float) -> str:
    return f"{value:.11e}"  # 12 significant digits


def emit_results(campaign: sim.CampaignResult, out_dir: Path,
                 started: str, finished: str) -> None:
    """Write summary.json (manifest first), ber.csv, and plotdata.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = campaign.config

    try:
        version = metadata.version("vfdrelay")
    except metadata.PackageNotFoundError:
        version = "unpackaged"

    results = []
    for rec in campaign.records:
        slot_pe = {
            str(slot): rec.mean_slot_pe[slot]
            for slot in range(rec.mean_slot_pe.size)
            if np.isfinite(rec.mean_slot_pe[slot])
        }
        results.append({
            "scheme": rec.scheme,
            "snr_db": rec.snr_db,
            "bit_errors": rec.bit_errors,
            "bits_total": rec.bits_total,
            "ber": rec.ber,
            "realizations": rec.realizations,
            "mean_slot_pe": slot_pe,
        })
    summary = {
        "manifest": {
            "package": "vfdrelay",
            "version": version,
            "generator": numerics.GENERATOR_KIND,
            "base_seed": config.base_seed,
            "started": started,
            "finished": finished,
            "redraws": campaign.redraws,
            "config": config_echo(config),
        },
        "results": results,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    with (out_dir / "ber.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["scheme", "snr_db", "bit_errors", "bits_total",
                         "ber", "realizations"])
        for rec in campaign.records:
            writer.writerow([rec.scheme, f"{rec.snr_db:g}", rec.bit_errors,
                             rec.bits_total, _format_ber(rec.ber), rec.realizations])

    with (out_dir / "plotdata.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["snr_db"] + list(config.schemes))
        for snr_db in config.snr_grid_db:
            row = [f"{snr_db:g}"]
            for scheme in config.schemes:
                row.append(_format_ber(campaign.record(scheme, float(snr_db)).ber))
            writer.writerow(row)


def main(argv: list[str] | None = None) -> int:
    try:
        config, out_dir = build_config(argv)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except SystemExit as err:  # argparse already printed its message
        return 0 if err.code in (0, None) else 2

    if out_dir.exists() and not out_dir.is_dir():
        print(f"runtime error: output path {out_dir} exists and is not a directory",
              file=sys.stderr)
        return 3

    started = datetime.now(timezone.utc).isoformat()
    try:
        campaign = sim.run_campaign(config)
        finished = datetime.now(timezone.utc).isoformat()
        emit_results(campaign, out_dir, started, finished)
    except Exception as err:  # the boundary where failures become exit codes
        print(f"runtime error: {err}", file=sys.stderr)
        return 3

    print(f"wrote {out_dir / 'summary.json'}")
    for rec in campaign.records:
        print(f"{rec.scheme:22s} {rec.snr_db:6.2f} dB  "
              f"ber {_format_ber(rec.ber)}  "
              f"({rec.bit_errors}/{rec.bits_total} bits, "
              f"{rec.realizations} realizations)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
