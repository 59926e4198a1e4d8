"""Experiment runner: parses line-oriented config files, executes single runs
and parameter sweeps (optionally paired sentinel/PEAS), and writes metric CSVs
plus JSON summaries under an output directory.

Config format (all keys optional; defaults are the standard 50 m x 50 m,
200-node, 6000 s scenario):

    # top level: SimConfig fields
    n_nodes = 300
    beta = 1.5
    protocol = both            # sentinel | peas | both (paired, same seed)
    replications = 5
    output_dir = results
    failure_injections = 12@1000, 40@4000

    [energy]                   # EnergyModel fields
    p_active = 0.015
    initial_energy = 500

    [sweep]                    # one key: list of values, one run set per value
    n_nodes = 100, 200, 300, 400

Exit codes: 0 success, 1 config error, 2 runtime/IO error.
"""

from __future__ import annotations

import argparse
import dataclasses
import shutil
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .analysis import (
    compare_runs,
    format_csv_value,
    summarize,
    summary_to_json,
    write_metrics_csv,
)
from .engine import EnergyModel, SimConfig, simulate

PROTOCOL_CHOICES = ("sentinel", "peas", "both")

_SIM_FIELDS = {f.name: f.type for f in dataclasses.fields(SimConfig)}
_ENERGY_FIELDS = {f.name: f.type for f in dataclasses.fields(EnergyModel)}

_BOOL_KEYS = {"collisions"}
_INT_KEYS = {"n_nodes", "seed", "k_probes", "msg_size"}
_OPTIONAL_FLOAT_KEYS = {"lambda_peas", "peas_probing_range"}


class ConfigError(ValueError):
    """Config file problem, annotated with the offending line number."""


@dataclass
class ExperimentSpec:
    """A base configuration plus the sweep/replication matrix around it."""

    base: SimConfig = field(default_factory=SimConfig)
    sweep: list[tuple[str, list]] = field(default_factory=list)
    protocol: str = "sentinel"  # sentinel | peas | both
    replications: int = 1
    output_dir: Path = Path("results")

    def validate(self) -> None:
        if self.protocol not in PROTOCOL_CHOICES:
            raise ValueError(f"protocol must be one of {PROTOCOL_CHOICES}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        for name, values in self.sweep:
            if name not in _SIM_FIELDS or name in ("energy", "failure_injections"):
                raise ValueError(f"sweep parameter {name!r} is not a SimConfig field")
            if not values:
                raise ValueError(f"sweep parameter {name!r} has no values")
        self.base.validate()


def _parse_scalar(key: str, raw: str, lineno: int):
    raw = raw.strip()
    try:
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if key in _INT_KEYS:
            return int(raw)
        if key in _OPTIONAL_FLOAT_KEYS:
            return None if raw.lower() == "none" else float(raw)
        if key == "protocol":
            return raw
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc


def _parse_failures(raw: str, lineno: int) -> list[tuple[int, float]]:
    out = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if "@" not in part:
            raise ConfigError(
                f"line {lineno}: failure injections use node_id@time, got {part!r}"
            )
        nid, when = part.split("@", 1)
        try:
            out.append((int(nid), float(when)))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad failure injection {part!r}") from exc
    return out


def parse_config(text: str) -> ExperimentSpec:
    """Build a fully validated ExperimentSpec from `key = value` text.

    Empty text yields the all-defaults spec. Unknown keys, type mismatches,
    and invariant violations raise ConfigError with the line number.
    """
    spec = ExperimentSpec()
    sim_kwargs: dict = {}
    energy_kwargs: dict = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            if section not in ("", "simulation", "energy", "sweep"):
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if section == "energy":
            if key not in _ENERGY_FIELDS:
                raise ConfigError(f"line {lineno}: unknown energy key {key!r}")
            energy_kwargs[key] = _parse_scalar(key, raw, lineno)
        elif section == "sweep":
            if key not in _SIM_FIELDS or key in ("energy", "failure_injections"):
                raise ConfigError(f"line {lineno}: cannot sweep over {key!r}")
            values = [_parse_scalar(key, v, lineno) for v in raw.split(",") if v.strip()]
            if not values:
                raise ConfigError(f"line {lineno}: sweep key {key!r} has no values")
            spec.sweep.append((key, values))
        else:  # top level / [simulation]
            if key == "replications":
                try:
                    spec.replications = int(raw)
                except ValueError as exc:
                    raise ConfigError(f"line {lineno}: bad replications {raw!r}") from exc
            elif key == "output_dir":
                spec.output_dir = Path(raw)
            elif key == "protocol":
                if raw not in PROTOCOL_CHOICES:
                    raise ConfigError(
                        f"line {lineno}: protocol must be one of {PROTOCOL_CHOICES}, "
                        f"got {raw!r}"
                    )
                spec.protocol = raw
            elif key == "failure_injections":
                sim_kwargs["failure_injections"] = _parse_failures(raw, lineno)
            elif key in _SIM_FIELDS and key not in ("energy", "protocol"):
                sim_kwargs[key] = _parse_scalar(key, raw, lineno)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if energy_kwargs:
        sim_kwargs["energy"] = EnergyModel(**energy_kwargs)
    spec.base = SimConfig(**sim_kwargs)
    if spec.protocol in ("sentinel", "peas"):
        spec.base.protocol = spec.protocol
    try:
        spec.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def load_config(path: Path) -> ExperimentSpec:
    return parse_config(path.read_text())


def _sweep_points(spec: ExperimentSpec) -> list[tuple[str, dict]]:
    """Expand the sweep into (point_name, field overrides) pairs."""
    if not spec.sweep:
        return [("base", {})]
    points = [("", {})]
    for name, values in spec.sweep:
        points = [
            (
                f"{prefix}_{name}_{value:g}" if prefix else f"{name}_{value:g}",
                {**overrides, name: value},
            )
            for prefix, overrides in points
            for value in values
        ]
    return points


SWEEP_SUMMARY_COLUMNS = (
    "point",
    "protocol",
    "replication",
    "seed",
    "avg_energy_per_node",
    "total_energy",
    "mean_coverage",
    "false_activation_fraction",
    "energy_saving_vs_peas",
)


def run_experiment(spec: ExperimentSpec) -> int:
    """Execute every sweep point x replication, writing per-run metrics.csv and
    summary.json plus a top-level sweep_summary.csv. Returns the exit code;
    partial outputs of a failed point are removed."""
    spec.validate()
    out_root = spec.output_dir
    out_root.mkdir(parents=True, exist_ok=True)
    summary_lines = [",".join(SWEEP_SUMMARY_COLUMNS)]
    protocols = ("sentinel", "peas") if spec.protocol == "both" else (spec.protocol,)
    for point_name, overrides in _sweep_points(spec):
        point_dir = out_root / point_name
        try:
            for rep in range(spec.replications):
                seed = spec.base.seed + rep
                results = {}
                for proto in protocols:
                    cfg = replace(
                        spec.base,
                        protocol=proto,
                        seed=seed,
                        failure_injections=list(spec.base.failure_injections),
                        **overrides,
                    )
                    results[proto] = (cfg, simulate(cfg))
                saving = None
                if len(protocols) == 2:
                    saving = compare_runs(results["sentinel"][1], results["peas"][1])
                for proto in protocols:
                    cfg, result = results[proto]
                    report = summarize(result)
                    if proto == "sentinel" and saving is not None:
                        report.energy_ratio_vs_baseline = saving
                    run_dir = point_dir / f"{proto}_rep{rep}"
                    run_dir.mkdir(parents=True, exist_ok=True)
                    write_metrics_csv(result.rows, run_dir / "metrics.csv")
                    (run_dir / "summary.json").write_text(summary_to_json(report, cfg))
                    summary_lines.append(
                        ",".join(
                            (
                                point_name,
                                proto,
                                str(rep),
                                str(seed),
                                format_csv_value(report.avg_energy_per_node),
                                format_csv_value(result.total_energy),
                                format_csv_value(report.mean_coverage),
                                format_csv_value(report.false_activation_fraction),
                                format_csv_value(saving)
                                if proto == "sentinel" and saving is not None
                                else "",
                            )
                        )
                    )
        except Exception as exc:
            if point_dir.exists():
                shutil.rmtree(point_dir)
            print(f"error: sweep point {point_name!r} failed: {exc}", file=sys.stderr)
            return 2
    (out_root / "sweep_summary.csv").write_text("\n".join(summary_lines) + "\n")
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentinelsim",
        description="Run duty-cycle scheduling experiments and write metric CSVs.",
    )
    parser.add_argument("--config", type=Path, help="experiment config file")
    parser.add_argument("--protocol", choices=PROTOCOL_CHOICES, help="override protocol")
    parser.add_argument("--seed", type=int, help="override base RNG seed")
    parser.add_argument("--duration", type=float, help="override simulated seconds")
    parser.add_argument("--nodes", type=int, help="override node count")
    parser.add_argument("--output", type=Path, help="override output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        spec = load_config(args.config) if args.config else ExperimentSpec()
        if args.protocol:
            spec.protocol = args.protocol
            if args.protocol in ("sentinel", "peas"):
                spec.base.protocol = args.protocol
        if args.seed is not None:
            spec.base.seed = args.seed
        if args.duration is not None:
            spec.base.duration = args.duration
        if args.nodes is not None:
            spec.base.n_nodes = args.nodes
        if args.output is not None:
            spec.output_dir = args.output
        spec.validate()
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return run_experiment(spec)
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
