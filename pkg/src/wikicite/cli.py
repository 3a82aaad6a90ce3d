"""Command-line entry point: one subcommand per pipeline stage plus `all`.

Exit codes: 0 success, 1 user error (bad config, missing dependency),
2 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .pipeline import (ConfigError, DependencyError, IntegrityError,
                       PipelineConfig, STAGES, load_config, run_stage)

STAGE_NAMES = tuple(STAGES) + ("all",)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wikicite",
        description="Extract, harmonize, classify and DOI-reconcile citations "
                    "from a MediaWiki XML dump.")
    parser.add_argument("--config", help="YAML/JSON pipeline config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="stage", required=True)
    for name in STAGE_NAMES:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--out", help="pipeline output directory")
        p.add_argument("--force", action="store_true",
                       help="re-run even if outputs are up to date")
        p.add_argument("--seed", type=int, help="global seed override")
        if name in ("extract", "all"):
            p.add_argument("--dump", help="MediaWiki XML dump (plain/bz2/gz)")
            p.add_argument("--templates", help="citation template list file")
        if name in ("map", "all"):
            p.add_argument("--aliases", help="parameter alias table (JSON)")
        if name in ("label", "all"):
            p.add_argument("--targets",
                           help="per-class sample counts, e.g. book=100,web=100,journal=100")
        if name in ("train", "all"):
            p.add_argument("--epochs", type=int)
            p.add_argument("--encoder", choices=("pooled", "recurrent"))
            p.add_argument("--freeze-chars", action="store_true")
            p.add_argument("--use-pretrained-chars", action="store_true")
        if name in ("lookup", "all"):
            p.add_argument("--threshold", type=float, help="score threshold")
            p.add_argument("--rps", type=float, help="max requests per second")
            p.add_argument("--cache", help="response cache directory")
            p.add_argument("--replay", help="recorded replay fixture file")
            p.add_argument("--live", action="store_true",
                           help="allow live requests to the works endpoint")
        if name in ("report", "all"):
            p.add_argument("--formats", help="comma list, e.g. csv,png")
    return parser


def _parse_targets(text: str) -> dict[str, int]:
    targets = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        targets[key.strip()] = int(value)
    return targets


def _apply_overrides(cfg: PipelineConfig, args: argparse.Namespace) -> None:
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed
    if getattr(args, "dump", None):
        cfg.dump = args.dump
    if getattr(args, "templates", None):
        cfg.templates_file = args.templates
    if getattr(args, "aliases", None):
        cfg.aliases_file = args.aliases
    if getattr(args, "targets", None):
        cfg.label_targets = _parse_targets(args.targets)
    if getattr(args, "epochs", None) is not None:
        cfg.train.epochs = args.epochs
    if getattr(args, "encoder", None):
        cfg.model.encoder_kind = args.encoder
    if getattr(args, "freeze_chars", False):
        cfg.train.freeze_chars = True
    if getattr(args, "use_pretrained_chars", False):
        cfg.use_pretrained_chars = True
    if getattr(args, "threshold", None) is not None:
        cfg.lookup.score_threshold = args.threshold
    if getattr(args, "rps", None) is not None:
        cfg.lookup.max_rps = args.rps
    if getattr(args, "cache", None):
        cfg.lookup.cache_dir = args.cache
    if getattr(args, "replay", None):
        cfg.lookup.replay_file = args.replay
    if getattr(args, "live", False):
        cfg.lookup.live = True
    if getattr(args, "formats", None):
        cfg.report.formats = tuple(args.formats.split(","))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s")
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        run_stage(args.stage, cfg, force=getattr(args, "force", False))
        return 0
    except (ConfigError, DependencyError, IntegrityError, FileNotFoundError) as exc:
        if isinstance(exc, ConfigError):
            for line in exc.errors:
                print(f"config error: {line}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 - the CLI boundary reports and exits 2
        logging.getLogger("wikicite").exception("internal error")
        return 2


if __name__ == "__main__":
    sys.exit(main())
