"""Command-line entry point.

Exit codes: 0 on success, 1 for configuration/validation problems,
2 for transport failures and unexpected errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline
from .config import PipelineConfig, config_from_dict, load_config
from .errors import TransportError, ValidationError

logger = logging.getLogger("lexrag")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexrag",
        description="Adaptive retrieval-augmented answering over legal corpora.",
    )
    parser.add_argument("--config", type=Path, help="JSON configuration file")
    parser.add_argument("--out", type=Path, help="output root (overrides config)")
    parser.add_argument("--seed", type=int, help="random seed (overrides config)")
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="debug-level logging"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("index", help="build chunk indexes for all configured variants")

    sub.add_parser("retrieve", help="produce ranked candidates for the benchmark")

    p = sub.add_parser("eval-retrieval", help="precision/recall curves per variant")
    p.add_argument("--runs", type=Path, help="retrieve run directory")

    p = sub.add_parser("generate", help="answer generation sweep over the benchmark")
    p.add_argument("--runs", type=Path, help="retrieve run directory")

    p = sub.add_parser("eval-generation", help="score generated answers")
    p.add_argument("--records", type=Path, help="records.jsonl from a generate run")

    p = sub.add_parser("ask", help="answer a single query end to end")
    p.add_argument("query", help="the question, optionally 'document ref; question'")

    p = sub.add_parser("sample-mini", help="sample a balanced mini benchmark")
    p.add_argument("--per-domain", type=int, help="queries per domain")
    p.add_argument("--dest", type=Path, help="destination directory (must not exist)")

    return parser


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.config is not None:
        cfg = load_config(args.config)
        if overrides:
            cfg = config_from_dict(cfg.to_dict(), **overrides)
        return cfg
    raise ValidationError(
        "--config is required (there is no default corpus location)"
    )


def _print_ask(result: dict) -> None:
    if result["error"]:
        print("generation failed:", result["error"])
        print("retrieved contexts (showing provenance only):")
    else:
        print(result["answer"])
        print()
    matched = result["matched_doc"] or "(none)"
    print(f"matched file : {matched} (similarity {result['match_similarity']:.3f})")
    print(
        f"query labels : {result['expertise']} "
        f"(readability {result['readability']:.2f}), {result['specificity']}"
    )
    scope = "matched file" if result["scoped"] else "whole corpus"
    print(f"retrieval    : k={result['k']} over {scope}")
    print(f"prompt/model : {result['template']} / {result['model']}")
    print("contexts     :")
    for cid in result["contexts"]:
        print(f"  - {cid}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load_config(args)
        if args.command == "index":
            result = pipeline.cmd_index(config)
        elif args.command == "retrieve":
            result = pipeline.cmd_retrieve(config)
        elif args.command == "eval-retrieval":
            result = pipeline.cmd_eval_retrieval(config, runs_dir=args.runs)
        elif args.command == "generate":
            result = pipeline.cmd_generate(config, runs_dir=args.runs)
        elif args.command == "eval-generation":
            result = pipeline.cmd_eval_generation(config, records_path=args.records)
        elif args.command == "ask":
            result = pipeline.cmd_ask(config, args.query)
            _print_ask(result)
            return 0
        elif args.command == "sample-mini":
            result = pipeline.cmd_sample_mini(
                config, per_domain=args.per_domain, dest=args.dest
            )
        else:  # pragma: no cover - argparse enforces the choices
            raise ValidationError(f"unknown command {args.command!r}")
        print(json.dumps(result, indent=2, sort_keys=True))
        return 0
    except ValidationError as exc:
        logger.error("%s", exc)
        return 1
    except TransportError as exc:
        logger.error("transport failure: %s", exc)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception:  # pragma: no cover - last resort
        logger.exception("unexpected failure")
        return 2


if __name__ == "__main__":
    sys.exit(main())
