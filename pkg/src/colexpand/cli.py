"""Command-line entry point.

Subcommands: summarize, expand, revise, run, eval, sweep. A JSON config
file given via --config overrides any flags it names.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import dataio, pipeline
from .evaluator import NoEvaluableColumnsError, render_report_text
from .gateway import GatewayError
from .generator import run_generator
from .model import InvalidRecordError
from .prompts import load_templates
from .reviser import run_reviser
from .summarizer import SummarizerConfig, SummarizerError, run_summarizer


def _add_gateway_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", dest="model_id", default="gpt-4o-2024-08-06",
                        help="model identifier sent to the provider")
    parser.add_argument("--cache-dir", default=None, help="disk cache for LLM responses")
    parser.add_argument("--mock-script", default=None,
                        help="scripted replies file (offline, deterministic)")
    parser.add_argument("--endpoint", default=None, help="chat-completion HTTP endpoint")
    parser.add_argument("--api-key-env", default="COLEXPAND_API_KEY",
                        help="environment variable holding the API credential")
    parser.add_argument("--parallelism", type=int, default=4,
                        help="max in-flight LLM requests")
    parser.add_argument("--prompts-dir", default=None,
                        help="directory of prompt template overrides")


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--schemas", required=True, help="input schemas (JSON lines)")
    parser.add_argument("--out-dir", required=True, help="output directory")
    parser.add_argument("--k", type=int, default=30, help="tables per summarizer batch")
    parser.add_argument("--p", type=int, default=10, help="columns per generator batch")
    parser.add_argument("--q", type=int, default=100, help="max peer tables in context")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed for sampling/shuffles")
    parser.add_argument("--shuffle-tables", action="store_true",
                        help="shuffle table order with the seed before running")
    parser.add_argument("--no-context", action="store_true",
                        help="skip the summarizer and drop all context")
    parser.add_argument("--no-table-names", action="store_true",
                        help="hide table names from generator and reviser prompts")
    parser.add_argument("--no-rules", action="store_true",
                        help="drop the rule list from generator prompts")
    parser.add_argument("--no-cot", action="store_true",
                        help="use direct exemplars instead of chain-of-thought")
    parser.add_argument("--no-reviser", action="store_true", help="skip the reviser stage")
    parser.add_argument("--baseline", dest="baseline_mode", action="store_true",
                        help="NameGuess-style prompting (forces the four ablations above)")
    _add_gateway_flags(parser)


def _add_eval_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gold", required=True, help="gold expansions (JSON lines)")
    parser.add_argument("--synonyms", default=None, help="synonym lexicon file")
    parser.add_argument("--embedder", default="offline-trigram",
                        help="'offline-trigram' or 'remote:<endpoint>'")
    parser.add_argument("--no-figures", dest="figures", action="store_false",
                        help="skip rendering the metrics figure")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colexpand",
        description="Expand abbreviated table column names into full English phrases.",
    )
    parser.add_argument("--config", default=None,
                        help="JSON config file; its values override flags")
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="full pipeline: summarize, expand, revise")
    _add_pipeline_flags(run_parser)

    summarize_parser = sub.add_parser("summarize", help="cluster tables and write summaries")
    _add_pipeline_flags(summarize_parser)

    expand_parser = sub.add_parser("expand", help="generate expansion records")
    _add_pipeline_flags(expand_parser)
    expand_parser.add_argument("--groups", default=None,
                               help="groups file from a summarize run")

    revise_parser = sub.add_parser("revise", help="revise records for consistency")
    _add_pipeline_flags(revise_parser)
    revise_parser.add_argument("--records", required=True, help="expansion records to revise")
    revise_parser.add_argument("--groups", default=None,
                               help="groups file from a summarize run")

    eval_parser = sub.add_parser("eval", help="score records against gold labels")
    eval_parser.add_argument("--records", required=True, help="expansion records file")
    eval_parser.add_argument("--out-dir", required=True, help="output directory")
    _add_eval_flags(eval_parser)

    sweep_parser = sub.add_parser("sweep", help="run the pipeline across parameter values")
    _add_pipeline_flags(sweep_parser)
    _add_eval_flags(sweep_parser)
    sweep_parser.add_argument("--parameter", required=True, choices=("k", "p"))
    sweep_parser.add_argument("--values", required=True,
                              help="comma-separated integer values, e.g. 20,30,40")

    return parser


def _apply_config_file(args: argparse.Namespace) -> None:
    if not args.config:
        return
    with open(args.config, encoding="utf-8") as handle:
        overrides = json.load(handle)
    if not isinstance(overrides, dict):
        raise ValueError(f"{args.config}: config file must hold a JSON object")
    for key, value in overrides.items():
        if not hasattr(args, key):
            raise ValueError(f"{args.config}: unknown config key {key!r}")
        setattr(args, key, value)


def _run_config(args: argparse.Namespace) -> pipeline.RunConfig:
    return pipeline.RunConfig(
        schemas_path=args.schemas,
        out_dir=args.out_dir,
        gold_path=getattr(args, "gold", None),
        synonyms_path=getattr(args, "synonyms", None),
        cache_dir=args.cache_dir,
        prompts_dir=args.prompts_dir,
        mock_script=args.mock_script,
        endpoint=args.endpoint,
        api_key_env=args.api_key_env,
        model_id=args.model_id,
        k=args.k,
        p=args.p,
        q=args.q,
        seed=args.seed,
        no_context=args.no_context,
        no_table_names=args.no_table_names,
        no_rules=args.no_rules,
        no_cot=args.no_cot,
        no_reviser=args.no_reviser,
        baseline_mode=args.baseline_mode,
        shuffle_tables=args.shuffle_tables,
        parallelism=args.parallelism,
        embedder=getattr(args, "embedder", "offline-trigram"),
        figures=getattr(args, "figures", True),
    )


def _load_ordered_schemas(config: pipeline.RunConfig):
    import random

    schemas = dataio.load_schemas(config.schemas_path)
    if config.shuffle_tables:
        random.Random(config.seed).shuffle(schemas)
    return schemas


def cmd_run(args: argparse.Namespace) -> int:
    config = _run_config(args)
    result = pipeline.run_pipeline(config)
    fallbacks = result.manifest["fallbacks"]["count"]
    cache = result.manifest["cache"]
    print(f"wrote {len(result.records)} records to {result.paths['records']}")
    print(f"fallback columns: {fallbacks}; cache hit rate: {cache['hit_rate']:.2f}")
    return 0


def cmd_summarize(args: argparse.Namespace) -> int:
    config = _run_config(args).effective()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    templates = load_templates(config.prompts_dir)
    gateway = pipeline.make_gateway(config)
    schemas = _load_ordered_schemas(config)
    groups, annotated = run_summarizer(
        schemas,
        SummarizerConfig(batch_size_k=config.k, seed=config.seed,
                         summary_word_cap=config.summary_word_cap),
        gateway,
        templates,
        parallelism=config.parallelism,
    )
    pipeline._write_groups(groups, out_dir / pipeline.GROUPS_FILENAME)
    dataio.write_schemas(annotated, out_dir / pipeline.ANNOTATED_FILENAME)
    print(f"{len(groups)} groups over {len(schemas)} tables "
          f"-> {out_dir / pipeline.GROUPS_FILENAME}")
    return 0


def cmd_expand(args: argparse.Namespace) -> int:
    config = _run_config(args).effective()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    templates = load_templates(config.prompts_dir)
    gateway = pipeline.make_gateway(config)
    schemas = _load_ordered_schemas(config)
    groups = pipeline.read_groups(args.groups) if args.groups else []
    if not config.no_context and not config.baseline_mode and not groups:
        print("error: context is enabled but no --groups file was given "
              "(run 'summarize' first or pass --no-context)", file=sys.stderr)
        return 2
    result = run_generator(
        schemas, groups, pipeline.generator_config(config), gateway,
        templates, config.parallelism,
    )
    records_path = out_dir / pipeline.RECORDS_FILENAME
    dataio.write_expansion_records(result.records, records_path)
    print(f"wrote {len(result.records)} records to {records_path} "
          f"({len(result.fallback_columns)} fallbacks)")
    return 0


def cmd_revise(args: argparse.Namespace) -> int:
    config = _run_config(args).effective()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    templates = load_templates(config.prompts_dir)
    gateway = pipeline.make_gateway(config)
    schemas = dataio.load_schemas(config.schemas_path)
    groups = pipeline.read_groups(args.groups) if args.groups else []
    records = dataio.read_expansion_records(args.records)
    revised, q_set = run_reviser(
        records, groups, schemas, pipeline.reviser_config(config),
        gateway, templates, config.parallelism,
    )
    records_path = out_dir / pipeline.RECORDS_FILENAME
    dataio.write_expansion_records(revised, records_path)
    rules_path = out_dir / pipeline.UNIQUE_RULES_FILENAME
    with open(rules_path, "w", encoding="utf-8") as handle:
        json.dump(q_set.rules, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")
    print(f"{len(q_set.rules)} unique rules applied -> {records_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    report, paths = pipeline.run_eval(
        args.records, args.gold, args.synonyms, args.out_dir,
        embedder_spec=args.embedder, figures=args.figures,
    )
    print(render_report_text(report))
    print(f"report: {paths['report']}")
    if "figure" in paths:
        print(f"figure: {paths['figure']}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    values = [int(v) for v in args.values.split(",") if v.strip()]
    config = _run_config(args)
    rows, paths = pipeline.run_sweep(config, args.parameter, values)
    for row in rows:
        if row["status"] == "ok":
            em = row["metrics"]["em"]
            syn_em = row["metrics"]["syn_em"]
            print(f"{args.parameter}={row['value']}: EM {em * 100:.1f}% "
                  f"syn-EM {syn_em * 100:.1f}%")
        else:
            print(f"{args.parameter}={row['value']}: FAILED ({row['error']})")
    print(f"sweep: {paths['sweep']}")
    if "figure" in paths:
        print(f"figure: {paths['figure']}")
    return 0


_HANDLERS = {
    "run": cmd_run,
    "summarize": cmd_summarize,
    "expand": cmd_expand,
    "revise": cmd_revise,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        return _HANDLERS[args.command](args)
    except (dataio.DatasetError, GatewayError, SummarizerError,
            InvalidRecordError, NoEvaluableColumnsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
