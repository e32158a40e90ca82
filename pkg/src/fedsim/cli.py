"""Command-line experiment runner.

Verbs:

* ``fedsim run <config.json>`` - run one experiment, write ``<name>.csv``
  plus a ``<name>.json`` sidecar echoing the fully resolved config.
* ``fedsim compare <a.csv> <b.csv> [--epsilon E] [--target-acc X] [--json]``
  - discordance between two runs plus max-accuracy / rounds-to-target.
* ``fedsim sweep <config.json> --set train.C=1,5,10 [--target-acc X]`` -
  one run per value with otherwise identical seeds, plus an index CSV.

Exit codes: 0 success, 2 config error, 3 data error, 4 runtime contract
violation. Metrics files are written atomically (temp file + rename), so
an interrupted run never leaves a partial CSV at the final path.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import tempfile
from dataclasses import dataclass

from . import __version__
from .config import ExperimentConfig, config_from_dict, load_config, run_experiment
from .errors import ConfigError, ContractError, DataError, FedsimError
from .metrics import MetricsLog, discordance

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONTRACT = 4


@dataclass(frozen=True)
class ComparisonSpec:
    """Inputs of a two-run comparison."""

    log_a: str
    log_b: str
    epsilon: float
    target_accuracy: float | None = None

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.target_accuracy is not None and not (0 < self.target_accuracy < 1):
            raise ConfigError("target accuracy must lie in (0, 1)")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_artifacts(config: ExperimentConfig, log: MetricsLog) -> tuple[str, str]:
    csv_path = os.path.join(config.output_dir, config.run_name + ".csv")
    sidecar_path = os.path.join(config.output_dir, config.run_name + ".json")
    sidecar = {
        "fedsim_version": __version__,
        "config": log.metadata["config"],
        "metrics_csv": os.path.basename(csv_path),
    }
    _atomic_write(csv_path, log.to_csv_string())
    _atomic_write(sidecar_path, json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return csv_path, sidecar_path


def cmd_run(config_path: str) -> int:
    config = load_config(config_path)
    log = run_experiment(config)
    csv_path, sidecar_path = _write_artifacts(config, log)
    print(f"wrote {csv_path} ({len(log.rows)} rows) and {sidecar_path}")
    return 0


def _rounds_to_target(log: MetricsLog, target: float | None) -> int | str | None:
    if target is None:
        return None
    first = log.first_round_reaching(target)
    return "never" if first is None else first


def cmd_compare(spec: ComparisonSpec, as_json: bool = False) -> int:
    log_a = MetricsLog.from_csv(spec.log_a)
    log_b = MetricsLog.from_csv(spec.log_b)
    report = discordance(log_a, log_b, spec.epsilon)
    sides = {"log_a": (spec.log_a, log_a), "log_b": (spec.log_b, log_b)}
    result = {
        "delta": report.delta,
        "epsilon": report.epsilon,
        "concordant": report.concordant,
        "rounds_compared": report.rounds_compared,
    }
    for side, (path, log) in sides.items():
        result[side] = {"path": path, "max_accuracy": log.max_accuracy()}
        if spec.target_accuracy is not None:
            result[side]["rounds_to_target"] = _rounds_to_target(log, spec.target_accuracy)
    if as_json:
        print(json.dumps(result, indent=2, sort_keys=True))
        return 0
    verdict = "concordant" if report.concordant else "NOT concordant"
    print(f"delta = {report.delta:.6g} over {report.rounds_compared} evaluated rounds")
    print(f"{verdict} at epsilon = {report.epsilon:g}")
    for side, (path, log) in sides.items():
        print(f"max accuracy [{side}] {path}: {log.max_accuracy():.4f}")
    if spec.target_accuracy is not None:
        for side, (path, log) in sides.items():
            reached = _rounds_to_target(log, spec.target_accuracy)
            print(f"first round with accuracy >= {spec.target_accuracy:g} [{side}] {path}: {reached}")
    return 0


def _parse_sweep_expr(expr: str) -> tuple[list[str], list]:
    if "=" not in expr:
        raise ConfigError(f"--set expects key=value,value,..., got {expr!r}")
    key, _, values_text = expr.partition("=")
    path = key.strip().split(".")
    if not all(path):
        raise ConfigError(f"--set: empty key component in {key!r}")
    values = []
    for part in values_text.split(","):
        part = part.strip()
        if not part:
            raise ConfigError(f"--set: empty value in {values_text!r}")
        try:
            values.append(json.loads(part))
        except json.JSONDecodeError:
            values.append(part)
    if not values:
        raise ConfigError("--set: at least one value is required")
    return path, values


def _set_in(document: dict, path: list[str], value) -> None:
    node = document
    for key in path[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"--set: unknown config key {'.'.join(path)!r}")
        node = node[key]
    if not isinstance(node, dict) or path[-1] not in node:
        raise ConfigError(f"--set: unknown config key {'.'.join(path)!r}")
    node[path[-1]] = value


def cmd_sweep(config_path: str, set_expr: str, target_accuracy: float | None = None) -> int:
    base = load_config(config_path)
    path, values = _parse_sweep_expr(set_expr)
    key_leaf = path[-1]
    summary_rows = []
    for value in values:
        document = copy.deepcopy(base.resolved)
        _set_in(document, path, value)
        document["output"]["name"] = f"{base.run_name}-{key_leaf}{value}"
        variant = config_from_dict(document)
        log = run_experiment(variant)
        csv_path, _ = _write_artifacts(variant, log)
        reached = _rounds_to_target(log, target_accuracy)
        summary_rows.append((value, log.max_accuracy(), "" if reached is None else reached))
        print(f"{'.'.join(path)}={value}: max accuracy {log.max_accuracy():.4f} -> {csv_path}")
    index_path = os.path.join(base.output_dir, f"{base.run_name}-sweep.csv")
    lines = ["value,max_accuracy,rounds_to_target"]
    lines += [f"{v},{acc!r},{reached}" for v, acc, reached in summary_rows]
    _atomic_write(index_path, "\n".join(lines) + "\n")
    print(f"wrote {index_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsim", description="Deterministic federated-learning simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("config", help="path to the experiment config JSON")

    p_cmp = sub.add_parser("compare", help="compare two metrics CSVs")
    p_cmp.add_argument("log_a")
    p_cmp.add_argument("log_b")
    p_cmp.add_argument("--epsilon", type=float, default=0.01)
    p_cmp.add_argument("--target-acc", type=float, default=None)
    p_cmp.add_argument("--json", action="store_true", dest="as_json")

    p_sweep = sub.add_parser("sweep", help="run one experiment per swept value")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--set", required=True, dest="set_expr", metavar="KEY=V1,V2,...")
    p_sweep.add_argument("--target-acc", type=float, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "compare":
            spec = ComparisonSpec(
                log_a=args.log_a,
                log_b=args.log_b,
                epsilon=args.epsilon,
                target_accuracy=args.target_acc,
            )
            return cmd_compare(spec, as_json=args.as_json)
        return cmd_sweep(args.config, args.set_expr, args.target_acc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ContractError, FedsimError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
