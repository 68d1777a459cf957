"""``miml`` command line entry point.

Exit codes: 0 success, 1 config error, 2 data error (leakage included),
3 convergence or other runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from miml import config as cfgmod
from miml import harness
from miml.bagdata import FORMATS, SynthSpec, generate_synthetic, load_dataset, write_dataset
from miml.errors import ConfigError, ConvergenceError, DataError, LeakageError
from miml.mlmetrics import format_table

log = logging.getLogger("miml")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")


def _load_cfg(args) -> dict:
    return cfgmod.load_config(args.config, cfgmod.parse_overrides(args.overrides))


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
        log.info("report written to %s", output)


def _cmd_cv(args) -> None:
    cfg = _load_cfg(args)
    report = harness.run_cv(cfg)
    _emit(harness.report_json(report), cfg["output"])
    print(format_table([report]), end="")


def _cmd_sweep(args) -> None:
    cfg = _load_cfg(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    reports = harness.sweep(cfg, args.axis, values)
    _emit(harness.report_json(reports), cfg["output"])
    print(format_table(reports, values, args.axis), end="")


def _cmd_train(args) -> None:
    cfg = _load_cfg(args)
    model = harness.train_model(cfg)
    harness.save_model(model, args.model_out)
    print(f"model saved to {args.model_out} (chain {list(model.chain_model.chain.order)})")


def _cmd_predict(args) -> None:
    model = harness.load_model(args.model)
    ds = load_dataset(args.data, args.format)
    harness.write_predictions(model, ds, args.out)
    print(f"{ds.n_bag} predictions written to {args.out}")


def _bool_arg(text: str) -> bool:
    try:
        return cfgmod.parse_bool(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _cmd_gen_synth(args) -> None:
    spec = SynthSpec(n_bag=args.bags, n_i_range=(args.ni_min, args.ni_max), n_feat=args.feat,
                     n_labels=args.labels, chain_dependency=args.chain_dep, seed=args.seed)
    ds = generate_synthetic(spec)
    write_dataset(ds, args.out, args.format)
    print(f"{ds.n_bag} bags written to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="miml", description="Chained multi-instance "
                                     "multi-label learning experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cv", help="cross-validate one configuration")
    _add_config_args(p)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("sweep", help="cross-validate along one config axis")
    _add_config_args(p)
    p.add_argument("--axis", required=True, choices=harness.SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("train", help="fit on the whole dataset and save the model")
    _add_config_args(p)
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="score a dataset with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", default="bag-jsonl", choices=FORMATS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("gen-synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--bags", type=int, required=True)
    p.add_argument("--labels", type=int, default=3)
    p.add_argument("--feat", type=int, default=5)
    p.add_argument("--ni-min", type=int, default=2)
    p.add_argument("--ni-max", type=int, default=5)
    p.add_argument("--chain-dep", type=_bool_arg, default=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="bag-jsonl", choices=FORMATS)
    p.set_defaults(func=_cmd_gen_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DataError, LeakageError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        log.debug("unhandled", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
