"""Stage one: cluster tables into topic groups and summarize them.

Tables are sent to the LLM in consecutive batches of up to k; each batch
is clustered into groups with a group summary plus a one-sentence summary
per table. A final global merge unions groups whose summaries are equal
after normalization.
"""

from __future__ import annotations

import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .gateway import Gateway
from .prompts import SUMMARIZER_SYSTEM, PromptTemplates
from .model import TableGroup, TableSchema

DEFAULT_SUMMARY_WORD_CAP = 40


class SummarizerError(RuntimeError):
    """The LLM reply stayed malformed after the format-reminder retry."""


@dataclass(frozen=True)
class SummarizerConfig:
    batch_size_k: int = 30
    seed: int = 0
    summary_word_cap: int = DEFAULT_SUMMARY_WORD_CAP

    def __post_init__(self) -> None:
        if self.batch_size_k < 1:
            raise ValueError("batch_size_k must be >= 1")


def _render_table(schema: TableSchema) -> str:
    return f"{schema.name}({', '.join(schema.column_names())})"


def build_cluster_prompt(
    tables: Sequence[TableSchema], templates: PromptTemplates
) -> tuple[str, str]:
    tables_block = "\n".join(_render_table(t) for t in tables)
    user = string.Template(templates.summarizer).substitute(
        table_count=str(len(tables)),
        tables_block=tables_block,
    )
    return SUMMARIZER_SYSTEM, user


def parse_cluster_reply(
    text: str, expected_names: Sequence[str]
) -> list[tuple[str, list[tuple[str, str]]]]:
    """Parse GROUP/TABLE sections; raises ValueError on any violation.

    Every expected table must appear exactly once, with a non-empty
    summary, under a group with a non-empty summary.
    """
    expected = set(expected_names)
    groups: list[tuple[str, list[tuple[str, str]]]] = []
    seen: set[str] = set()
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("GROUP:"):
            summary = stripped[len("GROUP:") :].strip()
            if not summary:
                raise ValueError("empty group summary")
            groups.append((summary, []))
        elif stripped.startswith("TABLE:"):
            if not groups:
                raise ValueError("TABLE line before any GROUP line")
            body = stripped[len("TABLE:") :]
            if "::" not in body:
                raise ValueError(f"TABLE line without '::': {stripped!r}")
            name, summary = body.split("::", 1)
            name = name.strip()
            summary = summary.strip()
            if name not in expected:
                raise ValueError(f"unknown table {name!r} in reply")
            if name in seen:
                raise ValueError(f"table {name!r} assigned twice")
            if not summary:
                raise ValueError(f"empty summary for table {name!r}")
            seen.add(name)
            groups[-1][1].append((name, summary))
    missing = expected - seen
    if missing:
        raise ValueError(f"tables missing from reply: {sorted(missing)}")
    empty_groups = [summary for summary, members in groups if not members]
    if empty_groups:
        raise ValueError(f"groups without members: {empty_groups}")
    return groups


def _truncate_words(text: str, cap: int) -> str:
    parts = text.split()
    return " ".join(parts[:cap]) if len(parts) > cap else text


def summarize_batch(
    tables: Sequence[TableSchema],
    config: SummarizerConfig,
    gateway: Gateway,
    templates: PromptTemplates,
    batch_id: str = "b000",
) -> tuple[list[TableGroup], dict[str, str]]:
    """Cluster one batch; one format-reminder retry before a hard error."""
    if not (1 <= len(tables) <= config.batch_size_k):
        raise ValueError(
            f"batch must hold between 1 and {config.batch_size_k} tables"
        )
    system, user = build_cluster_prompt(tables, templates)
    expected = [t.name for t in tables]
    reply = gateway.ask(system, user)
    try:
        parsed = parse_cluster_reply(reply, expected)
    except ValueError as first_error:
        reminder = (
            f"{user}\n\nYour previous reply was not in the required format "
            f"({first_error}). Reply again using only GROUP and TABLE lines, "
            f"covering every input table exactly once."
        )
        reply = gateway.ask(system, reminder)
        try:
            parsed = parse_cluster_reply(reply, expected)
        except ValueError as second_error:
            raise SummarizerError(
                f"batch {expected} failed to cluster: {second_error}"
            ) from second_error
    groups = []
    table_summaries: dict[str, str] = {}
    for index, (group_summary, members) in enumerate(parsed):
        groups.append(
            TableGroup(
                id=f"{batch_id}.g{index:02d}",
                summary=group_summary,
                members=tuple(name for name, _ in members),
            )
        )
        for name, summary in members:
            table_summaries[name] = _truncate_words(summary, config.summary_word_cap)
    return groups, table_summaries


def _normalize_summary(summary: str) -> str:
    return " ".join(summary.split()).lower()


def global_merge(groups: Sequence[TableGroup]) -> list[TableGroup]:
    """Union groups whose summaries are equal after normalization.

    Member order within and across batches is preserved; the first-seen
    casing of the summary wins.
    """
    merged: dict[str, TableGroup] = {}
    for group in groups:
        key = _normalize_summary(group.summary)
        existing = merged.get(key)
        if existing is None:
            merged[key] = group
        else:
            merged[key] = TableGroup(
                id=existing.id,
                summary=existing.summary,
                members=existing.members + group.members,
            )
    return list(merged.values())


def run_summarizer(
    schemas: Sequence[TableSchema],
    config: SummarizerConfig,
    gateway: Gateway,
    templates: PromptTemplates,
    parallelism: int = 4,
) -> tuple[list[TableGroup], list[TableSchema]]:
    """Cluster all tables and annotate each schema with its summary.

    Batches are consecutive slices of the input order; the merge runs once
    after every batch finished.
    """
    if not schemas:
        raise ValueError("no schemas to summarize")
    k = config.batch_size_k
    batches = [list(schemas[i : i + k]) for i in range(0, len(schemas), k)]
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        results = list(
            pool.map(
                lambda item: summarize_batch(
                    item[1], config, gateway, templates, batch_id=f"b{item[0]:03d}"
                ),
                enumerate(batches),
            )
        )
    all_groups: list[TableGroup] = []
    summaries: dict[str, str] = {}
    for groups, table_summaries in results:
        all_groups.extend(groups)
        summaries.update(table_summaries)
    merged = global_merge(all_groups)
    annotated = [replace(s, summary=summaries[s.name]) for s in schemas]
    return merged, annotated
