"""Command-line front end: configure scenarios, run them, export artifacts.

Configuration resolves in three layers: a packaged preset or a JSON
config file supplies the base document, command-line flags override its
values, and defaults fill whatever remains.  A config document is either
a single run object or ``{"runs": [...]}`` with several; every run
object accepts the same keys.  Unknown keys and unknown estimator kinds
are rejected by name with exit code 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from dataclasses import fields as dataclass_fields
from importlib import resources

from .estimators import ESTIMATOR_KINDS
from .harness import DGP_KINDS, LOGGER_KINDS, Scenario, export_results, run_scenario
from .nuisance import NuisanceConfig
from .report import render_figures

SCENARIO_NAMES = ("gaussian-neyman", "bandit-linucb", "bandit-lints", "custom")
PRESET_NAMES = ("paper-table-1", "paper-table-2")

_SCENARIO_BINDINGS = {
    "gaussian-neyman": ("gaussian-two-arm", "neyman-ratio"),
    "bandit-linucb": ("softmax-contextual", "linucb"),
    "bandit-lints": ("softmax-contextual", "lints"),
}

_RUN_KEYS = (
    "scenario", "T", "trials", "estimators", "seed", "out",
    "nuisance", "logger_params", "dgp", "logger", "jobs",
)
_NUISANCE_KEYS = tuple(f.name for f in dataclass_fields(NuisanceConfig))


class CliError(Exception):
    """A configuration problem that should terminate with exit code 2."""


@dataclass
class RunConfig:
    """One resolved run: a scenario family swept over one or more horizons."""

    scenario: str = "gaussian-neyman"
    horizons: tuple = (250, 500, 750)
    trials: int = 100
    estimators: tuple = ()
    seed: int = 0
    out: str = "results"
    nuisance: NuisanceConfig = field(default_factory=NuisanceConfig)
    logger_params: dict = field(default_factory=dict)
    dgp: str | None = None
    logger: str | None = None
    jobs: int = 1

    def resolved_kinds(self) -> tuple:
        if self.scenario != "custom":
            return _SCENARIO_BINDINGS[self.scenario]
        if self.dgp is None or self.logger is None:
            raise CliError("scenario 'custom' requires both 'dgp' and 'logger'")
        if self.dgp not in DGP_KINDS:
            raise CliError(f"unknown dgp {self.dgp!r}; expected one of {DGP_KINDS}")
        if self.logger not in LOGGER_KINDS:
            raise CliError(f"unknown logger {self.logger!r}; expected one of {LOGGER_KINDS}")
        return self.dgp, self.logger

    def scenarios(self) -> list:
        dgp, logger = self.resolved_kinds()
        return [
            Scenario(
                name=self.scenario,
                dgp=dgp,
                logger=logger,
                horizon=horizon,
                estimators=self.estimators,
                n_trials=self.trials,
                base_seed=self.seed,
                nuisance=self.nuisance,
                logger_params=self.logger_params,
            )
            for horizon in self.horizons
        ]

    def to_document(self) -> dict:
        doc = asdict(self)
        doc["T"] = list(doc.pop("horizons"))
        doc["estimators"] = list(doc["estimators"])
        return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-ope",
        description="Monte Carlo evaluation of mean-outcome estimators on adaptive bandit data.",
        epilog="estimator kinds: " + " ".join(ESTIMATOR_KINDS),
    )
    parser.add_argument("--scenario", choices=SCENARIO_NAMES, help="scenario family to run")
    parser.add_argument(
        "--T", dest="horizons", metavar="T[,T...]",
        help="comma-separated horizons (default 250,500,750)",
    )
    parser.add_argument("--trials", type=int, help="Monte Carlo trials per horizon (default 100)")
    parser.add_argument(
        "--estimators", metavar="KIND[,KIND...]",
        help="comma-separated estimator kinds (default: the scenario's standard set)",
    )
    parser.add_argument("--seed", type=int, help="base seed (default 0)")
    parser.add_argument("--out", help="output directory (default 'results')")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--preset", choices=PRESET_NAMES, help="packaged reproduction bundle")
    parser.add_argument(
        "--dry-run", action="store_true",
        help="print the resolved configuration and write nothing",
    )
    parser.add_argument(
        "--jobs", type=int, default=None,
        help="worker processes for trials (default: env ADAPTIVE_OPE_JOBS, else 1)",
    )
    return parser


def _parse_horizons(text: str) -> tuple:
    out = []
    for token in str(text).split(","):
        token = token.strip()
        try:
            value = int(token)
        except ValueError:
            raise CliError(f"invalid horizon {token!r}") from None
        if value < 1:
            raise CliError(f"horizon must be >= 1, got {value}")
        out.append(value)
    if not out:
        raise CliError("no horizons given")
    return tuple(out)


def _parse_estimators(spec) -> tuple:
    tokens = spec.split(",") if isinstance(spec, str) else list(spec)
    kinds = tuple(str(tok).strip() for tok in tokens if str(tok).strip())
    for kind in kinds:
        if kind not in ESTIMATOR_KINDS:
            raise CliError(
                f"unknown estimator kind {kind!r}; expected one of {', '.join(ESTIMATOR_KINDS)}"
            )
    return kinds


def _load_document(args) -> dict:
    if args.config and args.preset:
        raise CliError("--config and --preset are mutually exclusive")
    if args.preset:
        text = (
            resources.files("adaptive_ope")
            .joinpath("presets", args.preset + ".json")
            .read_text()
        )
        return json.loads(text)
    if args.config:
        if not os.path.exists(args.config):
            raise CliError(f"config file not found: {args.config}")
        try:
            with open(args.config) as fh:
                return json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"config file {args.config} is not valid JSON: {exc}") from None
    return {}


def _config_from_doc(doc: dict) -> RunConfig:
    for key in doc:
        if key not in _RUN_KEYS:
            raise CliError(f"unknown config key {key!r}")
    config = RunConfig()
    if "scenario" in doc:
        if doc["scenario"] not in SCENARIO_NAMES:
            raise CliError(
                f"unknown scenario {doc['scenario']!r}; expected one of {SCENARIO_NAMES}"
            )
        config.scenario = doc["scenario"]
    if "T" in doc:
        raw = doc["T"]
        config.horizons = (
            _parse_horizons(raw) if isinstance(raw, str)
            else _parse_horizons(",".join(str(v) for v in raw)) if isinstance(raw, list)
            else _parse_horizons(str(raw))
        )
    if "trials" in doc:
        config.trials = int(doc["trials"])
    if "estimators" in doc:
        config.estimators = _parse_estimators(doc["estimators"])
    if "seed" in doc:
        config.seed = int(doc["seed"])
    if "out" in doc:
        config.out = str(doc["out"])
    if "nuisance" in doc:
        overrides = doc["nuisance"]
        for key in overrides:
            if key not in _NUISANCE_KEYS:
                raise CliError(f"unknown nuisance key {key!r}")
        cleaned = {
            key: tuple(v) if isinstance(v, list) else v for key, v in overrides.items()
        }
        config.nuisance = NuisanceConfig(**cleaned)
    if "logger_params" in doc:
        config.logger_params = dict(doc["logger_params"])
    if "dgp" in doc:
        config.dgp = str(doc["dgp"])
    if "logger" in doc:
        config.logger = str(doc["logger"])
    if "jobs" in doc:
        config.jobs = int(doc["jobs"])
    return config


def parse_config(argv=None) -> tuple:
    """Flags + optional file/preset -> (run configs, dry_run flag).

    Flag values override file values on every run in the document.
    """
    args = build_parser().parse_args(argv)
    document = _load_document(args)
    run_docs = document.get("runs", [document]) if isinstance(document, dict) else None
    if run_docs is None or not isinstance(run_docs, list):
        raise CliError("config document must be an object or {'runs': [...]}")
    if isinstance(document, dict) and "runs" in document:
        extra = set(document) - {"runs"}
        if extra:
            raise CliError(f"unknown config key {sorted(extra)[0]!r}")

    env_jobs = os.environ.get("ADAPTIVE_OPE_JOBS")
    configs = []
    for doc in run_docs:
        if not isinstance(doc, dict):
            raise CliError("each run entry must be a JSON object")
        config = _config_from_doc(doc)
        if args.scenario is not None:
            config.scenario = args.scenario
        if args.horizons is not None:
            config.horizons = _parse_horizons(args.horizons)
        if args.trials is not None:
            if args.trials < 1:
                raise CliError(f"trials must be >= 1, got {args.trials}")
            config.trials = args.trials
        if args.estimators is not None:
            config.estimators = _parse_estimators(args.estimators)
        if args.seed is not None:
            config.seed = args.seed
        if args.out is not None:
            config.out = args.out
        if args.jobs is not None:
            config.jobs = args.jobs
        elif env_jobs is not None and "jobs" not in doc:
            try:
                config.jobs = int(env_jobs)
            except ValueError:
                raise CliError(f"ADAPTIVE_OPE_JOBS must be an integer, got {env_jobs!r}") from None
        if config.jobs < 1:
            raise CliError(f"jobs must be >= 1, got {config.jobs}")
        configs.append(config)
    if not configs:
        raise CliError("config document contains no runs")
    return configs, bool(args.dry_run)


def _format_metrics_table(results) -> str:
    header = ("scenario", "logger", "T", "estimator", "rmse", "sd", "cr", "n_trials")
    rows = [header]
    for result in results:
        for row in result.metrics:
            rows.append(
                (row.scenario, row.logger, str(row.horizon), row.estimator,
                 f"{row.rmse:.6g}", f"{row.sd:.6g}", f"{row.cr:.6g}", str(row.n_trials))
            )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
    return "\n".join(lines)


def run(configs) -> int:
    """Execute resolved run configs; write artifacts; print the metrics table."""
    if isinstance(configs, RunConfig):
        configs = [configs]
    by_out: dict = {}
    try:
        for config in configs:
            for scenario in config.scenarios():
                result = run_scenario(scenario, jobs=config.jobs)
                by_out.setdefault(config.out, []).append(result)
    except CliError:
        raise
    except Exception as exc:  # a trial-level hard failure aborts the run
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for out_dir, results in by_out.items():
        paths = export_results(results, out_dir)
        figure_paths = render_figures(results, out_dir)
        print(_format_metrics_table(results))
        written = list(paths.values()) + figure_paths
        print("\nwrote: " + "\n       ".join(written))
    return 0


def main(argv=None) -> int:
    try:
        configs, dry_run = parse_config(argv)
        if dry_run:
            print(json.dumps({"runs": [c.to_document() for c in configs]}, indent=2, sort_keys=True))
            return 0
        return run(configs)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
