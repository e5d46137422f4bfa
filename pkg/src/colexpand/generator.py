"""Stage two: expand column names in batches, one record per column.

Each prompt carries the table's group context, the rule list, and few-shot
exemplars (chain-of-thought or direct). Replies are rigid per-column
blocks; every parsed block is validated against the core invariants, with
one corrective re-prompt for the failing columns before falling back to a
flagged identity record.
"""

from __future__ import annotations

import random
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .gateway import Gateway
from .model import (
    ColumnName,
    DELIMITER_CHARS,
    ExpansionRecord,
    build_record,
    derive_delimiters,
    InvalidRecordError,
    TableGroup,
    TableSchema,
)
from .prompts import COT_INSTRUCTION, GENERATOR_SYSTEM, PromptTemplates


@dataclass(frozen=True)
class GeneratorConfig:
    batch_size_p: int = 10
    context_sample_q: int = 100
    seed: int = 0
    rules_enabled: bool = True
    cot_enabled: bool = True
    context_enabled: bool = True
    table_names_enabled: bool = True
    baseline_mode: bool = False

    def __post_init__(self) -> None:
        if self.batch_size_p < 1:
            raise ValueError("batch_size_p must be >= 1")
        if self.context_sample_q < 0:
            raise ValueError("context_sample_q must be >= 0")


@dataclass(frozen=True)
class PromptRuleSet:
    """The imperative rules embedded in generator prompts; always 9."""

    rules: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        if len(self.rules) != 9:
            raise ValueError(f"expected exactly 9 rules, got {len(self.rules)}")

    def render(self) -> str:
        lines = ["Follow these rules:"]
        lines.extend(f"{i}. {rule}" for i, rule in enumerate(self.rules, start=1))
        return "\n".join(lines)


@dataclass
class ParsedBlock:
    tokens: list[str] = field(default_factory=list)
    rules: list[tuple[str, str]] = field(default_factory=list)
    expansion: Optional[str] = None


@dataclass
class GeneratorResult:
    records: list[ExpansionRecord]
    fallback_columns: list[dict]


def build_context(
    table: TableSchema,
    group: Optional[TableGroup],
    summaries: Mapping[str, str],
    config: GeneratorConfig,
) -> str:
    """Render the context block for one table's prompts.

    Peers beyond the sample budget q are drawn without replacement by an
    RNG seeded from (seed, table name), so the sample is stable across
    runs and independent of processing order.
    """
    if not config.context_enabled:
        return ""
    lines = ["Context:"]
    if config.table_names_enabled:
        lines.append(f"Target table: {table.name}")
    else:
        own = summaries.get(table.name)
        if own:
            lines.append(f"Target table summary: {own}")
    if group is not None:
        lines.append(f"Group topic: {group.summary}")
        peers = [name for name in group.members if name != table.name]
        if len(peers) > config.context_sample_q:
            rng = random.Random(f"{config.seed}:{table.name}")
            peers = rng.sample(peers, config.context_sample_q)
        if peers:
            lines.append("Tables in the same group:")
        for name in peers:
            summary = summaries.get(name, "")
            if config.table_names_enabled:
                lines.append(f"- {name}: {summary}" if summary else f"- {name}")
            elif summary:
                lines.append(f"- {summary}")
    return "\n".join(lines)


def build_expand_prompt(
    columns: Sequence[str],
    context: str,
    rule_set: PromptRuleSet,
    config: GeneratorConfig,
    templates: PromptTemplates,
    error_note: Optional[Mapping[str, Sequence[str]]] = None,
) -> tuple[str, str]:
    columns_block = "\n".join(columns)
    if config.baseline_mode:
        user = string.Template(templates.generator_baseline).substitute(
            column_count=str(len(columns)),
            columns_block=columns_block,
        )
    else:
        context_block = context + "\n\n" if context else ""
        rules_block = rule_set.render() + "\n\n" if config.rules_enabled else ""
        exemplars = (
            templates.exemplars_cot if config.cot_enabled else templates.exemplars_direct
        )
        exemplars_block = exemplars.rstrip("\n") + "\n\n" if exemplars.strip() else ""
        user = string.Template(templates.generator).substitute(
            context_block=context_block,
            rules_block=rules_block,
            cot_instruction=COT_INSTRUCTION if config.cot_enabled else "",
            exemplars_block=exemplars_block,
            column_count=str(len(columns)),
            columns_block=columns_block,
        )
    if error_note:
        problems = "\n".join(
            f"- {raw}: {'; '.join(reasons)}" for raw, reasons in error_note.items()
        )
        user = (
            f"{user}\n\nYour previous reply was invalid for these columns:\n"
            f"{problems}\nReply again for exactly these columns, following the "
            f"required format."
        )
    return GENERATOR_SYSTEM, user


def parse_expand_reply(text: str, expected: Sequence[str]) -> dict[str, ParsedBlock]:
    """Collect the per-column blocks addressed to the expected columns.

    Reasoning lines and unknown columns are ignored; when a column appears
    in several blocks the last one wins.
    """
    wanted = set(expected)
    blocks: dict[str, ParsedBlock] = {}
    current_name: Optional[str] = None
    current: Optional[ParsedBlock] = None

    def flush() -> None:
        if current_name is not None and current_name in wanted:
            blocks[current_name] = current

    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("COLUMN:"):
            flush()
            current_name = stripped[len("COLUMN:") :].strip()
            current = ParsedBlock()
        elif current is None:
            continue
        elif stripped.startswith("TOKENS:"):
            current.tokens = [t.strip() for t in stripped[len("TOKENS:") :].split("|")]
        elif stripped.startswith("RULE:"):
            body = stripped[len("RULE:") :]
            if "->" in body:
                token, expansion = body.split("->", 1)
                current.rules.append((token.strip(), expansion.strip()))
            else:
                current.rules.append((body.strip(), ""))
        elif stripped.startswith("EXPANSION:"):
            current.expansion = stripped[len("EXPANSION:") :].strip()
    flush()
    return blocks


def _validate_block(
    table_name: str, raw: str, block: Optional[ParsedBlock]
) -> tuple[Optional[ExpansionRecord], list[str]]:
    if block is None:
        return None, ["no block found for this column"]
    if not block.tokens or any(not t for t in block.tokens):
        return None, ["missing or empty tokens"]
    delimiters = derive_delimiters(raw, block.tokens)
    if delimiters is None:
        return None, [
            f"tokens {block.tokens!r} cannot be interleaved with delimiters "
            f"to reconstruct {raw!r}"
        ]
    if len(block.rules) != len(block.tokens):
        return None, [
            f"{len(block.rules)} RULE lines for {len(block.tokens)} tokens"
        ]
    for i, (token, (rule_token, _)) in enumerate(zip(block.tokens, block.rules)):
        if token != rule_token:
            return None, [
                f"RULE line {i + 1} is for {rule_token!r} but token "
                f"{i + 1} is {token!r}"
            ]
    if block.expansion is None:
        return None, ["missing EXPANSION line"]
    try:
        record = build_record(
            table_name,
            raw,
            block.tokens,
            delimiters,
            [expansion for _, expansion in block.rules],
        )
    except InvalidRecordError as exc:
        return None, exc.reasons
    stated = " ".join(block.expansion.split())
    joined = " ".join(record.expansion.split())
    if stated != joined:
        return None, [
            f"EXPANSION line {block.expansion!r} does not match the joined "
            f"rule expansions {record.expansion!r}"
        ]
    return record, []


def identity_fallback(table_name: str, raw: str) -> ExpansionRecord:
    """Last-resort record: split on explicit delimiters, map tokens to themselves.

    Never guesses intra-token splits. Names that a delimiter split cannot
    represent (leading/trailing/doubled delimiters) become one token.
    """
    tokens: list[str] = []
    delimiters: list[str] = []
    current = ""
    representable = True
    for ch in raw:
        if ch in DELIMITER_CHARS:
            if not current:
                representable = False
                break
            tokens.append(current)
            delimiters.append(ch)
            current = ""
        else:
            current += ch
    if current:
        tokens.append(current)
    else:
        representable = False
    if not representable or not tokens:
        tokens, delimiters = [raw], []
    return build_record(table_name, raw, tokens, delimiters, list(tokens))


def expand_batch(
    table: TableSchema,
    columns: Sequence[ColumnName],
    context: str,
    rule_set: PromptRuleSet,
    config: GeneratorConfig,
    gateway: Gateway,
    templates: PromptTemplates,
) -> tuple[list[ExpansionRecord], list[dict]]:
    """Expand one batch of columns; returns (records, flagged fallbacks)."""
    raws = [c.raw for c in columns]
    system, user = build_expand_prompt(raws, context, rule_set, config, templates)
    reply = gateway.ask(system, user)
    blocks = parse_expand_reply(reply, raws)
    records: dict[str, ExpansionRecord] = {}
    failures: dict[str, list[str]] = {}
    for raw in raws:
        record, reasons = _validate_block(table.name, raw, blocks.get(raw))
        if record is not None:
            records[raw] = record
        else:
            failures[raw] = reasons

    flagged: list[dict] = []
    if failures:
        retry_raws = list(failures)
        system, retry_user = build_expand_prompt(
            retry_raws, context, rule_set, config, templates, error_note=failures
        )
        retry_reply = gateway.ask(system, retry_user)
        retry_blocks = parse_expand_reply(retry_reply, retry_raws)
        for raw in retry_raws:
            record, reasons = _validate_block(table.name, raw, retry_blocks.get(raw))
            if record is not None:
                records[raw] = record
            else:
                records[raw] = identity_fallback(table.name, raw)
                flagged.append(
                    {"table": table.name, "column": raw, "reasons": reasons}
                )
    return [records[raw] for raw in raws], flagged


def run_generator(
    schemas: Sequence[TableSchema],
    groups: Sequence[TableGroup],
    config: GeneratorConfig,
    gateway: Gateway,
    templates: PromptTemplates,
    parallelism: int = 4,
) -> GeneratorResult:
    """Expand every column of every table; exactly one record per column.

    Batches run concurrently; the output is ordered by table name with the
    per-table column order preserved, so results are stable regardless of
    input order or thread scheduling.
    """
    group_by_table: dict[str, TableGroup] = {}
    for group in groups:
        for member in group.members:
            group_by_table[member] = group
    summaries = {s.name: s.summary for s in schemas if s.summary}
    rule_set = PromptRuleSet(templates.rules)

    jobs: list[tuple[TableSchema, list[ColumnName], str]] = []
    for table in schemas:
        context = build_context(table, group_by_table.get(table.name), summaries, config)
        cols = list(table.columns)
        for start in range(0, len(cols), config.batch_size_p):
            jobs.append((table, cols[start : start + config.batch_size_p], context))

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        outcomes = list(
            pool.map(
                lambda job: expand_batch(
                    job[0], job[1], job[2], rule_set, config, gateway, templates
                ),
                jobs,
            )
        )

    per_table: dict[str, list[ExpansionRecord]] = {}
    flagged_by_table: dict[str, list[dict]] = {}
    for (table, _, _), (batch_records, batch_flagged) in zip(jobs, outcomes):
        per_table.setdefault(table.name, []).extend(batch_records)
        flagged_by_table.setdefault(table.name, []).extend(batch_flagged)

    records: list[ExpansionRecord] = []
    flagged: list[dict] = []
    for name in sorted(per_table):
        records.extend(per_table[name])
        flagged.extend(flagged_by_table.get(name, []))
    return GeneratorResult(records=records, fallback_columns=flagged)
