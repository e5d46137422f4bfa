"""Wires the three stages plus evaluation into reproducible, audited runs.

Every pipeline run writes a manifest (config snapshot, table order, cache
hit rate, fallback count, timings) next to its outputs so ablation and
sensitivity results can be traced back to the exact configuration that
produced them.
"""

from __future__ import annotations

import dataclasses
import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from . import dataio
from .evaluator import MetricReport, evaluate_records
from .gateway import Gateway, HttpChatProvider, MockProvider
from .generator import GeneratorConfig, GeneratorResult, run_generator
from .metrics import SynonymLexicon, make_embedder
from .model import ExpansionRecord, TableGroup, TableSchema
from .prompts import PromptTemplates, load_templates
from .reviser import ReviserConfig, run_reviser
from .summarizer import SummarizerConfig, run_summarizer

PathLike = Union[str, Path]

RECORDS_FILENAME = "expansions.jsonl"
GROUPS_FILENAME = "groups.jsonl"
ANNOTATED_FILENAME = "schemas_with_summaries.jsonl"
UNIQUE_RULES_FILENAME = "unique_rules.json"
MANIFEST_FILENAME = "manifest.json"
REPORT_FILENAME = "report.jsonl"
REPORT_FIGURE_FILENAME = "report_metrics.png"
SWEEP_FILENAME = "sweep.jsonl"
SWEEP_FIGURE_FILENAME = "sweep_metrics.png"


@dataclass
class RunConfig:
    """Everything one pipeline run depends on."""

    schemas_path: str
    out_dir: str
    gold_path: Optional[str] = None
    synonyms_path: Optional[str] = None
    cache_dir: Optional[str] = None
    prompts_dir: Optional[str] = None
    mock_script: Optional[str] = None
    endpoint: Optional[str] = None
    api_key_env: str = "COLEXPAND_API_KEY"
    model_id: str = "gpt-4o-2024-08-06"
    k: int = 30
    p: int = 10
    q: int = 100
    seed: int = 0
    no_context: bool = False
    no_table_names: bool = False
    no_rules: bool = False
    no_cot: bool = False
    no_reviser: bool = False
    baseline_mode: bool = False
    shuffle_tables: bool = False
    parallelism: int = 4
    embedder: str = "offline-trigram"
    figures: bool = True
    max_attempts: int = 3
    backoff_seconds: float = 0.5
    summary_word_cap: int = 40
    min_token_length: int = 2
    max_candidates: Optional[int] = None

    def __post_init__(self) -> None:
        if self.k < 1 or self.p < 1 or self.q < 0:
            raise ValueError("require k >= 1, p >= 1, q >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    def effective(self) -> "RunConfig":
        """Baseline mode dominates: it forces the NameGuess-style ablations."""
        if not self.baseline_mode:
            return self
        return dataclasses.replace(
            self,
            no_context=True,
            no_rules=True,
            no_cot=True,
            no_reviser=True,
        )


@dataclass
class PipelineResult:
    records: list[ExpansionRecord]
    groups: list[TableGroup]
    manifest: dict
    paths: dict[str, str] = field(default_factory=dict)


def make_gateway(config: RunConfig) -> Gateway:
    if config.mock_script:
        provider = MockProvider.from_file(config.mock_script)
    elif config.endpoint:
        provider = HttpChatProvider(config.endpoint, api_key_env=config.api_key_env)
    else:
        raise ValueError("configure either --mock-script or --endpoint")
    return Gateway(
        provider,
        model_id=config.model_id,
        cache_dir=config.cache_dir,
        max_attempts=config.max_attempts,
        backoff_seconds=config.backoff_seconds,
        parallelism=config.parallelism,
    )


def generator_config(config: RunConfig) -> GeneratorConfig:
    return GeneratorConfig(
        batch_size_p=config.p,
        context_sample_q=config.q,
        seed=config.seed,
        rules_enabled=not config.no_rules,
        cot_enabled=not config.no_cot,
        context_enabled=not config.no_context,
        table_names_enabled=not config.no_table_names,
        baseline_mode=config.baseline_mode,
    )


def reviser_config(config: RunConfig) -> ReviserConfig:
    return ReviserConfig(
        min_token_length=config.min_token_length,
        max_candidates=config.max_candidates,
        include_group_summaries=not config.no_context,
        table_names_enabled=not config.no_table_names,
    )


def _config_snapshot(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def _write_manifest(manifest: dict, out_dir: Path) -> Path:
    path = out_dir / MANIFEST_FILENAME
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")
    return path


def run_pipeline(config: RunConfig, gateway: Optional[Gateway] = None) -> PipelineResult:
    """Summarize (unless -co) -> expand -> revise (unless -to), with audit trail.

    On a mid-run error the completed stage outputs stay on disk and the
    manifest carries a failure marker before the error is re-raised.
    """
    cfg = config.effective()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    templates = load_templates(cfg.prompts_dir)
    gw = gateway if gateway is not None else make_gateway(cfg)

    schemas = dataio.load_schemas(cfg.schemas_path)
    if cfg.shuffle_tables:
        rng = random.Random(cfg.seed)
        rng.shuffle(schemas)

    manifest: dict = {
        "config": _config_snapshot(config),
        "table_order": [s.name for s in schemas],
        "counts": {
            "tables": len(schemas),
            "columns": sum(len(s.columns) for s in schemas),
        },
        "status": "running",
    }
    paths: dict[str, str] = {}
    timings: dict[str, float] = {}
    started = time.perf_counter()

    try:
        groups: list[TableGroup] = []
        if not cfg.no_context:
            stage_start = time.perf_counter()
            groups, schemas = run_summarizer(
                schemas,
                SummarizerConfig(
                    batch_size_k=cfg.k,
                    seed=cfg.seed,
                    summary_word_cap=cfg.summary_word_cap,
                ),
                gw,
                templates,
                parallelism=cfg.parallelism,
            )
            timings["summarizer_s"] = time.perf_counter() - stage_start
            _write_groups(groups, out_dir / GROUPS_FILENAME)
            dataio.write_schemas(schemas, out_dir / ANNOTATED_FILENAME)
            paths["groups"] = str(out_dir / GROUPS_FILENAME)
            paths["annotated_schemas"] = str(out_dir / ANNOTATED_FILENAME)

        stage_start = time.perf_counter()
        gen_result: GeneratorResult = run_generator(
            schemas, groups, generator_config(cfg), gw, templates, cfg.parallelism
        )
        timings["generator_s"] = time.perf_counter() - stage_start
        records = gen_result.records

        if not cfg.no_reviser:
            stage_start = time.perf_counter()
            records, q_set = run_reviser(
                records,
                groups,
                schemas,
                reviser_config(cfg),
                gw,
                templates,
                cfg.parallelism,
            )
            timings["reviser_s"] = time.perf_counter() - stage_start
            rules_path = out_dir / UNIQUE_RULES_FILENAME
            with open(rules_path, "w", encoding="utf-8") as handle:
                json.dump(q_set.rules, handle, indent=2, sort_keys=True, ensure_ascii=False)
                handle.write("\n")
            paths["unique_rules"] = str(rules_path)

        records_path = out_dir / RECORDS_FILENAME
        dataio.write_expansion_records(records, records_path)
        paths["records"] = str(records_path)

        timings["total_s"] = time.perf_counter() - started
        manifest.update(
            {
                "status": "ok",
                "cache": gw.cache_stats(),
                "fallbacks": {
                    "count": len(gen_result.fallback_columns),
                    "columns": gen_result.fallback_columns,
                },
                "counts": {
                    **manifest["counts"],
                    "records": len(records),
                    "groups": len(groups),
                },
                "timings": timings,
                "paths": paths,
            }
        )
        manifest_path = _write_manifest(manifest, out_dir)
        paths["manifest"] = str(manifest_path)
        return PipelineResult(records=records, groups=groups, manifest=manifest, paths=paths)
    except Exception as exc:
        timings["total_s"] = time.perf_counter() - started
        manifest.update(
            {
                "status": "failed",
                "error": f"{type(exc).__name__}: {exc}",
                "cache": gw.cache_stats(),
                "timings": timings,
                "paths": paths,
            }
        )
        _write_manifest(manifest, out_dir)
        raise


def _write_groups(groups: Sequence[TableGroup], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for group in groups:
            payload = {
                "id": group.id,
                "summary": group.summary,
                "members": list(group.members),
            }
            handle.write(json.dumps(payload, ensure_ascii=False) + "\n")


def read_groups(path: PathLike) -> list[TableGroup]:
    groups = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                payload = json.loads(stripped)
                groups.append(
                    TableGroup(
                        id=payload["id"],
                        summary=payload["summary"],
                        members=tuple(payload["members"]),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise dataio.DatasetError(f"{path}:{lineno}: bad group record ({exc})") from exc
    return groups


def run_eval(
    records_path: PathLike,
    gold_path: PathLike,
    synonyms_path: Optional[PathLike],
    out_dir: PathLike,
    embedder_spec: str = "offline-trigram",
    figures: bool = True,
) -> tuple[MetricReport, dict[str, str]]:
    """Score a records file against gold labels; write report and figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = dataio.read_expansion_records(records_path)
    gold = dataio.load_gold(gold_path)
    lexicon = (
        dataio.load_synonyms(synonyms_path)
        if synonyms_path
        else SynonymLexicon.empty()
    )
    embedder = make_embedder(embedder_spec)
    report = evaluate_records(records, gold, lexicon, embedder)
    report_path = out / REPORT_FILENAME
    dataio.write_report(report, report_path)
    paths = {"report": str(report_path)}
    if figures:
        from . import figures as figure_mod

        figure_path = out / REPORT_FIGURE_FILENAME
        figure_mod.save_metric_bars(report, figure_path)
        paths["figure"] = str(figure_path)
    return report, paths


def run_sweep(
    config: RunConfig,
    parameter: str,
    values: Sequence[int],
    gateway: Optional[Gateway] = None,
) -> tuple[list[dict], dict[str, str]]:
    """One pipeline+eval run per parameter value, sharing the response cache.

    Per-value failures are recorded and the sweep continues.
    """
    if parameter not in ("k", "p"):
        raise ValueError("sweep parameter must be 'k' or 'p'")
    if not values:
        raise ValueError("sweep needs at least one value")
    if not config.gold_path:
        raise ValueError("sweep requires a gold file for evaluation")

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gw = gateway if gateway is not None else make_gateway(config.effective())
    rows: list[dict] = []
    for value in values:
        sub_config = dataclasses.replace(
            config,
            **{parameter: value},
            out_dir=str(out_dir / f"{parameter}_{value}"),
        )
        try:
            result = run_pipeline(sub_config, gateway=gw)
            report, _ = run_eval(
                result.paths["records"],
                config.gold_path,
                config.synonyms_path,
                sub_config.out_dir,
                embedder_spec=config.embedder,
                figures=False,
            )
            rows.append(
                {
                    "parameter": parameter,
                    "value": value,
                    "status": "ok",
                    "metrics": report.aggregates,
                    "evaluated": report.evaluated_count,
                }
            )
        except Exception as exc:
            rows.append(
                {
                    "parameter": parameter,
                    "value": value,
                    "status": "failed",
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )

    sweep_path = out_dir / SWEEP_FILENAME
    with open(sweep_path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    paths = {"sweep": str(sweep_path)}
    if config.figures and any(row["status"] == "ok" for row in rows):
        from . import figures as figure_mod

        figure_path = out_dir / SWEEP_FIGURE_FILENAME
        figure_mod.save_sweep_lines(rows, parameter, figure_path)
        paths["figure"] = str(figure_path)
    return rows, paths
