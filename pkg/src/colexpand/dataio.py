"""Readers and writers for the pipeline's line-delimited file formats.

Schemas, gold labels, and expansion records are UTF-8 JSON lines so that
lake-scale inputs stream without loading everything twice. The synonym
lexicon is a plain text format, one equivalence class per line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .metrics import SynonymLexicon
from .model import (
    ColumnName,
    ExpansionRecord,
    ExpansionRule,
    TableSchema,
    TokenSequence,
    record_errors,
)

PathLike = Union[str, Path]


class DatasetError(ValueError):
    """A data file failed to parse or violated a format invariant."""


@dataclass(frozen=True)
class GoldLabel:
    """The hand-curated correct expansion for one column.

    Columns whose correct expansion could not be determined are marked
    excluded; they stay in the input schemas but never enter metric
    aggregates.
    """

    table_name: str
    column_raw: str
    gold_expansion: str
    excluded: bool = False


def _iter_json_lines(path: PathLike):
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                payload = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(payload, dict):
                raise DatasetError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, payload


def _require(payload: dict, key: str, path: PathLike, lineno: int):
    if key not in payload:
        raise DatasetError(f"{path}:{lineno}: missing key {key!r}")
    return payload[key]


def load_schemas(path: PathLike) -> list[TableSchema]:
    """Read table schemas, preserving file order.

    Order matters downstream: the summarizer batches tables consecutively.
    """
    schemas: list[TableSchema] = []
    seen_tables: set[str] = set()
    for lineno, payload in _iter_json_lines(path):
        name = _require(payload, "table_name", path, lineno)
        columns = _require(payload, "columns", path, lineno)
        if not isinstance(name, str) or not name.strip():
            raise DatasetError(f"{path}:{lineno}: table_name must be a non-empty string")
        if not isinstance(columns, list) or not all(isinstance(c, str) for c in columns):
            raise DatasetError(f"{path}:{lineno}: columns must be a list of strings")
        if not columns:
            raise DatasetError(f"{path}:{lineno}: table {name!r} has no columns")
        if name in seen_tables:
            raise DatasetError(f"{path}:{lineno}: duplicate table name {name!r}")
        seen_tables.add(name)
        summary = payload.get("summary")
        if summary is not None and not isinstance(summary, str):
            raise DatasetError(f"{path}:{lineno}: summary must be a string")
        try:
            schema = TableSchema(
                name=name,
                columns=tuple(ColumnName(c) for c in columns),
                summary=summary,
            )
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
        schemas.append(schema)
    return schemas


def write_schemas(schemas: Iterable[TableSchema], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for schema in schemas:
            payload: dict = {
                "table_name": schema.name,
                "columns": schema.column_names(),
            }
            if schema.summary is not None:
                payload["summary"] = schema.summary
            handle.write(json.dumps(payload, ensure_ascii=False) + "\n")


def load_gold(path: PathLike) -> list[GoldLabel]:
    """Read gold labels keyed by (table_name, column)."""
    labels: list[GoldLabel] = []
    seen: set[tuple[str, str]] = set()
    for lineno, payload in _iter_json_lines(path):
        table = _require(payload, "table_name", path, lineno)
        column = _require(payload, "column", path, lineno)
        gold = payload.get("gold", "")
        excluded = payload.get("excluded", False)
        if not isinstance(table, str) or not isinstance(column, str):
            raise DatasetError(f"{path}:{lineno}: table_name and column must be strings")
        if not isinstance(gold, str) or not isinstance(excluded, bool):
            raise DatasetError(f"{path}:{lineno}: gold must be a string, excluded a boolean")
        key = (table, column)
        if key in seen:
            raise DatasetError(f"{path}:{lineno}: duplicate gold entry for {key!r}")
        seen.add(key)
        if excluded and gold.strip():
            raise DatasetError(
                f"{path}:{lineno}: excluded column {key!r} must not carry a gold expansion"
            )
        if not excluded and not gold.strip():
            raise DatasetError(
                f"{path}:{lineno}: column {key!r} has no gold expansion and is not excluded"
            )
        labels.append(
            GoldLabel(
                table_name=table,
                column_raw=column,
                gold_expansion=gold if not excluded else "",
                excluded=excluded,
            )
        )
    return labels


def write_gold(labels: Iterable[GoldLabel], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for label in labels:
            payload: dict = {
                "table_name": label.table_name,
                "column": label.column_raw,
                "gold": label.gold_expansion,
            }
            if label.excluded:
                payload["excluded"] = True
            handle.write(json.dumps(payload, ensure_ascii=False) + "\n")


def load_synonyms(path: PathLike) -> SynonymLexicon:
    """Read a synonym lexicon: one class per line, phrases joined by '='.

    '#' starts a comment; classes sharing a phrase are merged transitively.
    """
    classes: list[list[str]] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            phrases = [p.strip() for p in body.split("=")]
            if any(not p for p in phrases) or len(phrases) < 2:
                raise DatasetError(
                    f"{path}:{lineno}: a synonym class needs at least 2 phrases "
                    f"separated by '='"
                )
            classes.append(phrases)
    try:
        return SynonymLexicon.from_classes(classes)
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from exc


def write_expansion_records(records: Iterable[ExpansionRecord], path: PathLike) -> None:
    """Write one JSON line per record: table, column, tokens, delimiters, rules, expansion."""
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            payload = {
                "table": record.table_name,
                "column": record.column.raw,
                "tokens": list(record.token_sequence.tokens),
                "delimiters": list(record.token_sequence.delimiters),
                "rules": [
                    {"token": rule.token, "expansion": rule.expansion}
                    for rule in record.rules
                ],
                "expansion": record.expansion,
            }
            handle.write(json.dumps(payload, ensure_ascii=False) + "\n")


def read_expansion_records(path: PathLike) -> list[ExpansionRecord]:
    """Read expansion records back, re-validating every invariant."""
    records: list[ExpansionRecord] = []
    seen: set[tuple[str, str]] = set()
    for lineno, payload in _iter_json_lines(path):
        table = _require(payload, "table", path, lineno)
        column = _require(payload, "column", path, lineno)
        tokens = _require(payload, "tokens", path, lineno)
        delimiters = _require(payload, "delimiters", path, lineno)
        rules = _require(payload, "rules", path, lineno)
        expansion = _require(payload, "expansion", path, lineno)
        key = (table, column)
        if key in seen:
            raise DatasetError(f"{path}:{lineno}: duplicate record for {key!r}")
        seen.add(key)
        try:
            record = ExpansionRecord(
                table_name=table,
                column=ColumnName(column),
                token_sequence=TokenSequence(tuple(tokens), tuple(delimiters)),
                rules=tuple(
                    ExpansionRule(rule["token"], rule["expansion"]) for rule in rules
                ),
                expansion=expansion,
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
        problems = record_errors(record)
        if problems:
            raise DatasetError(f"{path}:{lineno}: " + "; ".join(problems))
        records.append(record)
    return records


def write_report(report, path: PathLike) -> None:
    """Write an evaluation report as JSON lines.

    One "column" line per scored column, then a single "aggregate" line
    with the metric means over non-excluded columns.
    """
    with open(path, "w", encoding="utf-8") as handle:
        for score in report.per_column:
            payload = {
                "kind": "column",
                "table": score.table,
                "column": score.column,
                "prediction": score.prediction,
                "gold": score.gold,
                "excluded": score.excluded,
                "em": score.em,
                "word_f1": score.word_f1,
                "embed_f1": score.embed_f1,
                "syn_em": score.syn_em,
                "syn_word_f1": score.syn_word_f1,
                "syn_embed_f1": score.syn_embed_f1,
            }
            handle.write(json.dumps(payload, ensure_ascii=False) + "\n")
        summary = {
            "kind": "aggregate",
            "evaluated": report.evaluated_count,
            "excluded": report.excluded_count,
            "unmatched": report.unmatched_count,
            "metrics": report.aggregates,
        }
        handle.write(json.dumps(summary, ensure_ascii=False) + "\n")
