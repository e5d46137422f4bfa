"""Score predicted expansions against gold labels, building a MetricReport."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .dataio import GoldLabel
from .metrics import (
    Embedder,
    SynonymLexicon,
    TrigramEmbedder,
    embedding_f1,
    exact_match,
    synonym_aware_em,
    synonym_aware_embedding_f1,
    synonym_aware_word_f1,
    word_f1,
)
from .model import ExpansionRecord

METRIC_KEYS = ("em", "word_f1", "embed_f1", "syn_em", "syn_word_f1", "syn_embed_f1")

_METRIC_LABELS = {
    "em": "EM",
    "word_f1": "word F1",
    "embed_f1": "embedding F1",
    "syn_em": "syn EM",
    "syn_word_f1": "syn word F1",
    "syn_embed_f1": "syn embedding F1",
}


class NoEvaluableColumnsError(ValueError):
    """Every gold column was excluded or unmatched; nothing to aggregate."""


@dataclass(frozen=True)
class ColumnScore:
    table: str
    column: str
    prediction: str
    gold: str
    excluded: bool
    em: Optional[bool] = None
    word_f1: Optional[float] = None
    embed_f1: Optional[float] = None
    syn_em: Optional[bool] = None
    syn_word_f1: Optional[float] = None
    syn_embed_f1: Optional[float] = None


@dataclass(frozen=True)
class MetricReport:
    per_column: tuple[ColumnScore, ...]
    aggregates: dict[str, float]
    evaluated_count: int
    excluded_count: int
    unmatched_count: int


def score_pair(
    prediction: str,
    gold: str,
    lexicon: SynonymLexicon,
    embedder: Embedder,
) -> dict:
    return {
        "em": exact_match(prediction, gold),
        "word_f1": word_f1(prediction, gold),
        "embed_f1": embedding_f1(prediction, gold, embedder),
        "syn_em": synonym_aware_em(prediction, gold, lexicon),
        "syn_word_f1": synonym_aware_word_f1(prediction, gold, lexicon),
        "syn_embed_f1": synonym_aware_embedding_f1(prediction, gold, lexicon, embedder),
    }


def evaluate_records(
    records: Sequence[ExpansionRecord],
    gold_labels: Sequence[GoldLabel],
    lexicon: Optional[SynonymLexicon] = None,
    embedder: Optional[Embedder] = None,
) -> MetricReport:
    """Join records with gold labels and aggregate the six metrics.

    Excluded columns appear per-column but never in the aggregates.
    Keys present on only one side are skipped and counted as unmatched.
    """
    lexicon = lexicon if lexicon is not None else SynonymLexicon.empty()
    embedder = embedder if embedder is not None else TrigramEmbedder()
    gold_by_key = {(g.table_name, g.column_raw): g for g in gold_labels}
    record_keys = {(r.table_name, r.column.raw) for r in records}

    per_column: list[ColumnScore] = []
    sums = {key: 0.0 for key in METRIC_KEYS}
    evaluated = 0
    excluded = 0
    unmatched = sum(1 for key in gold_by_key if key not in record_keys)
    unmatched += sum(1 for key in record_keys if key not in gold_by_key)

    for record in records:
        key = (record.table_name, record.column.raw)
        label = gold_by_key.get(key)
        if label is None:
            continue
        if label.excluded:
            excluded += 1
            per_column.append(
                ColumnScore(
                    table=record.table_name,
                    column=record.column.raw,
                    prediction=record.expansion,
                    gold="",
                    excluded=True,
                )
            )
            continue
        scores = score_pair(record.expansion, label.gold_expansion, lexicon, embedder)
        evaluated += 1
        for metric_key in METRIC_KEYS:
            sums[metric_key] += float(scores[metric_key])
        per_column.append(
            ColumnScore(
                table=record.table_name,
                column=record.column.raw,
                prediction=record.expansion,
                gold=label.gold_expansion,
                excluded=False,
                **scores,
            )
        )

    if evaluated == 0:
        raise NoEvaluableColumnsError("no evaluable columns")
    aggregates = {key: sums[key] / evaluated for key in METRIC_KEYS}
    return MetricReport(
        per_column=tuple(per_column),
        aggregates=aggregates,
        evaluated_count=evaluated,
        excluded_count=excluded,
        unmatched_count=unmatched,
    )


def format_percent(value: float) -> str:
    """0.815 -> '81.5%' (one decimal place)."""
    return f"{value * 100:.1f}%"


def render_report_text(report: MetricReport) -> str:
    lines = [
        f"columns evaluated: {report.evaluated_count} "
        f"(excluded: {report.excluded_count}, unmatched: {report.unmatched_count})"
    ]
    for key in METRIC_KEYS:
        label = _METRIC_LABELS[key]
        lines.append(f"{label:<18} {format_percent(report.aggregates[key])}")
    return "\n".join(lines)
