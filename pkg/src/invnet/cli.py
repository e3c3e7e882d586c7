"""Command-line interface.

Global options resolve as flag > environment (INVNET_SEED / INVNET_OUT) >
config file. Exit codes: 0 success, 2 configuration, 3 data or model files,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

from . import config as cfgmod
from . import pipeline
from .errors import ConfigError, InvnetError


def _build_parser() -> argparse.ArgumentParser:
    # global options live on a shared parent so they parse before or after
    # the subcommand; argparse keeps already-set values when the subparser
    # applies its defaults
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="experiment config file (INI or JSON)")
    common.add_argument("--tag", choices=cfgmod.SYSTEM_TAGS,
                        help="system tag; uses built-in defaults when no "
                             "--config is given")
    common.add_argument("--seed", type=int, help="override the experiment seed")
    common.add_argument("--out", metavar="DIR", help="artifact directory")

    parser = argparse.ArgumentParser(
        prog="invnet",
        parents=[common],
        description="Train and interrogate inverse-aware surrogate models "
                    "of parametric physical systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate-data", parents=[common],
                   help="simulate the training dataset")

    p = sub.add_parser("train", parents=[common], help="fit model components")
    p.add_argument("--component", default="all",
                   choices=("emulator", "flow", "vae", "all"))

    p = sub.add_parser("sample-outputs", parents=[common],
                       help="draw outputs from the density model")
    p.add_argument("--n", type=int, help="number of draws")

    p = sub.add_parser("invert", parents=[common],
                       help="recover input estimates for a target output")
    p.add_argument("--ystar", required=True,
                   help="comma-separated target output components")
    p.add_argument("--strategy", choices=cfgmod.STRATEGIES)
    p.add_argument("--n", type=int, help="number of inverse estimates")
    p.add_argument("--R", type=int, dest="pc_rounds",
                   help="predictor-corrector round trips")
    p.add_argument("--S", type=int, dest="hd_components",
                   help="posterior components for high-density selection")
    p.add_argument("--Q", type=int, dest="hd_draws",
                   help="draws per posterior component")
    p.add_argument("--latent-flow-config", metavar="PATH",
                   help="INI file whose [latent_flow] section overrides the "
                        "latent flow training settings")

    p = sub.add_parser("verify", parents=[common],
                       help="re-solve inverse estimates and score them")
    p.add_argument("--oracle", default="exact", choices=("exact", "emulator"))
    p.add_argument("--reject-above", type=float,
                   help="drop rows whose relative error exceeds this")
    p.add_argument("--strategy", choices=cfgmod.STRATEGIES,
                   help="which inversion artifact to verify")

    sub.add_parser("eval-emulator", parents=[common],
                   help="one-step and rollout emulator accuracy")
    sub.add_parser("report", parents=[common],
                   help="merge artifact summaries into one report")
    return parser


def _resolve_config(args) -> tuple:
    if args.config:
        cfg = cfgmod.load_config(args.config)
        if args.tag and args.tag != cfg.tag:
            raise ConfigError(f"--tag {args.tag} conflicts with config tag {cfg.tag}")
    elif args.tag:
        cfg = cfgmod.defaults(args.tag)
    else:
        raise ConfigError("provide --config PATH or --tag NAME")

    if args.seed is not None:
        cfg.experiment["seed"] = args.seed
    elif os.environ.get("INVNET_SEED"):
        raw = os.environ["INVNET_SEED"]
        try:
            cfg.experiment["seed"] = int(raw)
        except ValueError:
            raise ConfigError(f"INVNET_SEED={raw!r} is not an integer") from None

    if args.out is not None:
        out = args.out
    elif os.environ.get("INVNET_OUT"):
        out = os.environ["INVNET_OUT"]
    else:
        out = cfg.out
    cfgmod.validate(cfg)
    return cfg, Path(out)


def _parse_ystar(raw: str):
    try:
        values = [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"--ystar must be comma-separated numbers, got {raw!r}") \
            from None
    if not values:
        raise ConfigError("--ystar is empty")
    return values


def _apply_latent_flow_overrides(cfg, path: str) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not Path(path).exists():
        raise ConfigError(f"latent flow config not found: {path}")
    try:
        parser.read_string(Path(path).read_text())
    except configparser.Error as exc:
        raise ConfigError(f"malformed latent flow config: {exc}") from None
    if "latent_flow" not in parser.sections():
        raise ConfigError(f"{path} has no [latent_flow] section")
    for key, raw in parser.items("latent_flow"):
        if key not in cfg.latent_flow:
            raise ConfigError(f"unknown key {key!r} in [latent_flow]")
        cfg.latent_flow[key] = cfgmod._coerce("latent_flow", key, raw,
                                              cfg.latent_flow[key])


def _dispatch(args, cfg, out: Path) -> None:
    if args.command == "generate-data":
        path = pipeline.run_generate(cfg, out)
        print(f"wrote {path}")
    elif args.command == "train":
        bundle = pipeline.run_train(cfg, out, component=args.component)
        trained = [n for n in ("emulator", "flow", "encoder", "decoder")
                   if bundle.component(n) is not None]
        print(f"wrote {pipeline.artifact(out, cfg.tag, 'model.bin')} "
              f"({', '.join(trained)})")
    elif args.command == "sample-outputs":
        path = pipeline.run_sample_outputs(cfg, out, n=args.n)
        print(f"wrote {path}")
    elif args.command == "invert":
        if args.strategy:
            cfg.sampling["strategy"] = args.strategy
        if args.n is not None:
            cfg.sampling["n"] = args.n
        if args.pc_rounds is not None:
            cfg.sampling["R"] = args.pc_rounds
        if args.hd_components is not None:
            cfg.sampling["S"] = args.hd_components
        if args.hd_draws is not None:
            cfg.sampling["Q"] = args.hd_draws
        if args.latent_flow_config:
            _apply_latent_flow_overrides(cfg, args.latent_flow_config)
        cfgmod.validate(cfg)
        path = pipeline.run_invert(cfg, out, _parse_ystar(args.ystar))
        print(f"wrote {path}")
    elif args.command == "verify":
        report = pipeline.run_verify(cfg, out, oracle=args.oracle,
                                     reject_above=args.reject_above,
                                     strategy=args.strategy)
        slug = (args.strategy or cfg.sampling["strategy"]).replace("+", "-")
        print(f"wrote {pipeline.artifact(out, cfg.tag, f'verify-{slug}.csv')} "
              f"(n={report.summary['n']}, failed={report.summary['n_failed']})")
    elif args.command == "eval-emulator":
        result = pipeline.run_eval_emulator(cfg, out)
        print(f"wrote {pipeline.artifact(out, cfg.tag, 'emulator-eval.json')} "
              f"(rel_l2_mean={result['one_step']['rel_l2_mean']:.6g})")
    elif args.command == "report":
        path = pipeline.run_report(cfg, out)
        print(f"wrote {path}")
    else:  # pragma: no cover - argparse enforces the choices
        raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, out = _resolve_config(args)
        _dispatch(args, cfg, out)
    except InvnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
