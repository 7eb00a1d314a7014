"""Experiment command line.

Subcommands mirror the pipeline stages; `pipeline` runs everything.  Exit
codes: 0 success, 2 config error, 3 stage failure, 4 oracle infeasible.
The BARYCOAL_SEED environment variable overrides any configured seed
(highest precedence, then --seed, then the config file).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import (
    BASELINES,
    ConfigError,
    ExperimentConfig,
    PipelineRun,
    StageFailure,
    load_experiment_config,
    run_oracle,
    run_pipeline,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_ORACLE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="barycoal",
        description="Continual learning of generative models via W1 barycenter coalescence",
    )
    parser.add_argument("--config", type=Path, help="experiment config (JSON)")
    parser.add_argument("--out", type=Path, help="output directory for the run")
    parser.add_argument("--seed", type=int, help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, doc in [
        ("synth", "write the synthetic node/target datasets"),
        ("pretrain", "train one WGAN-GP per node dataset"),
        ("coalesce", "stage I: recursive coalescence of the pre-trained models"),
        ("eval", "score all generator checkpoints against the references"),
        ("pipeline", "run every stage end to end"),
    ]:
        sub.add_parser(name, help=doc)

    adapt = sub.add_parser("adapt", help="stage II: fast adaptation on the local samples")
    adapt.add_argument("--ternary", action="store_true", help="quantization-aware adaptation")

    baseline = sub.add_parser("baseline", help="train a comparison baseline")
    baseline.add_argument("name", choices=[b.replace("_", "-") for b in BASELINES])

    oracle = sub.add_parser("oracle", help="solve a barycenter problem file exactly")
    oracle.add_argument("problem", type=Path, help="problem JSON")
    oracle.add_argument("result", type=Path, help="where to write the result JSON")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    config = load_experiment_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    env_seed = os.environ.get("BARYCOAL_SEED")
    if env_seed is not None:
        try:
            config = replace(config, seed=int(env_seed))
        except ValueError as exc:
            raise ConfigError(f"BARYCOAL_SEED must be an integer, got {env_seed!r}") from exc
    return config


def _require_out(args) -> Path:
    if args.out is None:
        raise ConfigError("--out is required for this command")
    return args.out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle":
            try:
                result = run_oracle(args.problem, args.result)
            except RuntimeError as exc:
                print(f"oracle infeasible: {exc}", file=sys.stderr)
                return EXIT_ORACLE
            print(f"objective {result['objective']!r} -> {args.result}")
            return EXIT_OK

        config = _resolve_config(args)
        out = _require_out(args)

        if args.command == "pipeline":
            manifest = run_pipeline(config, out)
            print(f"pipeline complete: {len(manifest.stages)} stages, run {manifest.run_id}")
            return EXIT_OK

        run = PipelineRun(config, out)
        if args.command == "synth":
            run.synth()
            print(f"datasets written to {run.paths['data']}")
        elif args.command == "pretrain":
            run.pretrain()
            print(f"pretrained {config.dataset.num_nodes} node model(s)")
        elif args.command == "coalesce":
            run.coalesce()
            print("stage 1 checkpoints written")
        elif args.command == "adapt":
            run.adapt(ternary=args.ternary)
            print("stage 2 generator written")
        elif args.command == "baseline":
            run.baseline(args.name.replace("-", "_"))
            print(f"baseline {args.name} generator written")
        elif args.command == "eval":
            scores = run.evaluate()
            for name, row in scores.items():
                print(
                    f"{name}: w1_to_target={row['w1_to_target']:.4f} "
                    f"w1_to_old={row['w1_to_old']:.4f} frechet={row['frechet']:.4f}"
                )
        run.write_manifest([args.command])
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STAGE
    except FileNotFoundError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
