"""Command-line entry points: train, eval, prep-pairs, serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_engine_config
from .engine import build_bundle
from .evaluation import evaluate, report_tsv
from .policy import save_checkpoint
from .ref_predictor import generate_training_pairs, write_pairs_tsv
from .trainer import train_epochs
from .user_sim import USER_KINDS

__all__ = ["main"]


def _add_shared_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="engine config JSON")
    sub.add_argument("--seed", type=int, default=None, help="override config seed")


def _add_run_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--checkpoint", default=None,
                     help="checkpoint path (overrides checkpointPath in config)")
    sub.add_argument("--user", choices=USER_KINDS, default=None,
                     help="override user model")
    sub.add_argument("--predictor", choices=("oracle", "lexical", "scorefile"),
                     default=None, help="override reformulation predictor")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convqa",
        description="Conversational KG question answering with policy learning.")
    subs = parser.add_subparsers(dest="command", required=True)

    train = subs.add_parser("train", help="train a policy and save a checkpoint")
    _add_shared_flags(train)
    _add_run_flags(train)
    train.add_argument("--log", default=None, help="write per-batch log lines here")

    ev = subs.add_parser("eval", help="evaluate a checkpoint against the dataset")
    _add_shared_flags(ev)
    _add_run_flags(ev)
    ev.add_argument("--online", action="store_true",
                    help="keep learning between turns during evaluation")
    ev.add_argument("--report", default=None, help="write the TSV report here")

    pairs = subs.add_parser("prep-pairs",
                            help="emit labeled text pairs for predictor training")
    _add_shared_flags(pairs)
    pairs.add_argument("--out", required=True, help="output TSV path")

    serve = subs.add_parser("serve", help="run the interactive HTTP service")
    _add_shared_flags(serve)
    _add_run_flags(serve)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--frontend", default=None,
                       help="directory of built UI assets to serve")

    return parser


def _checkpoint_path(args, cfg) -> Path | None:
    if args.checkpoint is not None:
        return Path(args.checkpoint)
    return cfg.checkpoint_path


def _cmd_train(args) -> int:
    cfg = load_engine_config(args.config)
    bundle = build_bundle(cfg, seed=args.seed, user_model=args.user,
                          predictor=args.predictor)
    result = train_epochs(bundle.dataset, bundle.kg, bundle.params,
                          bundle.providers.embedder, bundle.providers.ned,
                          bundle.providers.predictor, cfg.train, cfg.context,
                          user_kind=cfg.user_model, adam=bundle.adam,
                          ranking_mode=cfg.ranking_mode)
    out = _checkpoint_path(args, cfg)
    if out is None:
        print("error: no checkpoint path given (--checkpoint or checkpointPath)",
              file=sys.stderr)
        return 1
    save_checkpoint(out, result.params, result.adam)
    log_text = "\n".join(result.log_lines) + "\n" if result.log_lines else ""
    if args.log is not None:
        Path(args.log).write_text(log_text, encoding="utf-8")
    else:
        sys.stdout.write(log_text)
    for stat in result.epoch_stats:
        print(f"epoch {stat['epoch']}: meanReward={stat['mean_reward']:.4f} "
              f"experiences={stat['experiences']} "
              f"greedyAccuracy={stat['greedy_accuracy']:.4f}")
    print(f"saved checkpoint: {out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = load_engine_config(args.config)
    ckpt = _checkpoint_path(args, cfg)
    bundle = build_bundle(cfg, seed=args.seed, user_model=args.user,
                          predictor=args.predictor, load_checkpoint_from=ckpt)
    report = evaluate(bundle.dataset, bundle.kg, bundle.params,
                      bundle.providers.embedder, bundle.providers.ned,
                      cfg.context, user_kind=cfg.user_model,
                      top_k=cfg.train.top_k, mode=cfg.ranking_mode,
                      action_cap=cfg.train.action_cap, seed=cfg.train.seed,
                      online=args.online,
                      predictor=bundle.providers.predictor if args.online else None,
                      train_cfg=cfg.train if args.online else None,
                      adam=bundle.adam if args.online else None)
    text = report_tsv(report)
    if args.report is not None:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
        print(f"wrote report: {args.report}")
    else:
        print(text)
    return 0


def _cmd_prep_pairs(args) -> int:
    cfg = load_engine_config(args.config)
    bundle = build_bundle(cfg, seed=args.seed)
    pairs = generate_training_pairs(bundle.dataset, seed=cfg.train.seed)
    write_pairs_tsv(pairs, args.out)
    positives = sum(1 for p in pairs if p[2] == 1)
    print(f"wrote {len(pairs)} pairs ({positives} positive) to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import LearningService, create_app

    cfg = load_engine_config(args.config)
    ckpt = _checkpoint_path(args, cfg)
    if ckpt is not None and not Path(ckpt).exists():
        ckpt = None  # serving may start from a fresh policy
    bundle = build_bundle(cfg, seed=args.seed, user_model=args.user,
                          predictor=args.predictor, load_checkpoint_from=ckpt)
    frontend = args.frontend
    if frontend is None:
        default_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend = default_dir if default_dir.exists() else None
    app = create_app(LearningService(bundle), frontend_dir=frontend)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "prep-pairs": _cmd_prep_pairs,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
