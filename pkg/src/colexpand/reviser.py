"""Stage three: detect tokens expanded inconsistently and adjudicate them.

Builds a lake-wide rule index (token -> observed expansions with
frequencies), asks the LLM whether each multi-rule token deserves one
global expansion, and rewrites the records accordingly. Length-1 tokens
are never sent: they legitimately expand many ways.
"""

from __future__ import annotations

import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from .gateway import Gateway
from .model import (
    ExpansionRecord,
    ExpansionRule,
    is_valid_expansion,
    TableGroup,
    TableSchema,
)
from .prompts import REVISER_SYSTEM, PromptTemplates


@dataclass(frozen=True)
class ReviserConfig:
    min_token_length: int = 2
    max_candidates: Optional[int] = None
    include_group_summaries: bool = True
    table_names_enabled: bool = True


@dataclass(frozen=True)
class RuleUsage:
    """One observed expansion of a token across the lake."""

    expansion: str
    frequency: int
    sample_table: str


@dataclass(frozen=True)
class RuleIndex:
    """Case-folded token -> its observed expansions, most frequent first."""

    entries: dict[str, tuple[RuleUsage, ...]]

    def total_frequency(self, token: str) -> int:
        return sum(usage.frequency for usage in self.entries.get(token, ()))


@dataclass(frozen=True)
class UniqueRuleSet:
    """Adjudicated token -> single expansion, applied lake-wide."""

    rules: dict[str, str]

    def __post_init__(self) -> None:
        for token, expansion in self.rules.items():
            if not is_valid_expansion(token, expansion):
                raise ValueError(
                    f"unique rule {token!r} -> {expansion!r} fails the "
                    f"subsequence requirement"
                )
            if token.isdigit() and expansion != token:
                raise ValueError(
                    f"numeric token {token!r} cannot be re-expanded to {expansion!r}"
                )


def build_rule_index(records: Sequence[ExpansionRecord]) -> RuleIndex:
    """Count each (token, expansion) pair once per column name.

    Tokens and expansions are matched case-insensitively; the first-seen
    casing and table are kept for display.
    """
    counts: dict[tuple[str, str], int] = {}
    display: dict[tuple[str, str], str] = {}
    sample: dict[tuple[str, str], str] = {}
    for record in records:
        seen_in_column: set[tuple[str, str]] = set()
        for rule in record.rules:
            key = (rule.token.casefold(), rule.expansion.casefold())
            if key in seen_in_column:
                continue
            seen_in_column.add(key)
            counts[key] = counts.get(key, 0) + 1
            display.setdefault(key, rule.expansion)
            sample.setdefault(key, record.table_name)
    grouped: dict[str, list[RuleUsage]] = {}
    for key, frequency in counts.items():
        grouped.setdefault(key[0], []).append(
            RuleUsage(
                expansion=display[key],
                frequency=frequency,
                sample_table=sample[key],
            )
        )
    entries = {
        token: tuple(
            sorted(usages, key=lambda u: (-u.frequency, u.expansion.casefold()))
        )
        for token, usages in sorted(grouped.items())
    }
    return RuleIndex(entries=entries)


def select_candidates(
    index: RuleIndex,
    min_token_length: int = 2,
    max_candidates: Optional[int] = None,
) -> list[str]:
    """Tokens worth adjudicating: several expansions and enough characters."""
    candidates = [
        token
        for token, usages in index.entries.items()
        if len(usages) >= 2 and len(token) >= min_token_length
    ]
    candidates.sort(key=lambda t: (-index.total_frequency(t), t))
    if max_candidates is not None:
        candidates = candidates[:max_candidates]
    return candidates


def _render_sample(
    table_name: str,
    schemas_by_name: Mapping[str, TableSchema],
    table_names_enabled: bool,
) -> str:
    schema = schemas_by_name.get(table_name)
    if schema is None:
        return table_name if table_names_enabled else "(table withheld)"
    columns = ", ".join(schema.column_names())
    if table_names_enabled:
        return f"{schema.name}({columns})"
    return f"columns: {columns}"


def build_adjudicate_prompt(
    token: str,
    usages: Sequence[RuleUsage],
    group_summaries: Sequence[str],
    schemas_by_name: Mapping[str, TableSchema],
    config: ReviserConfig,
    templates: PromptTemplates,
) -> tuple[str, str]:
    if config.include_group_summaries and group_summaries:
        summaries_block = (
            "Topics of the table groups in the lake:\n"
            + "\n".join(f"- {summary}" for summary in group_summaries)
            + "\n\n"
        )
    else:
        summaries_block = ""
    lines = []
    for usage in usages:
        sample = _render_sample(
            usage.sample_table, schemas_by_name, config.table_names_enabled
        )
        lines.append(
            f'- "{usage.expansion}" (used in {usage.frequency} column names; '
            f"sample table: {sample})"
        )
    user = string.Template(templates.reviser).substitute(
        token=token,
        group_summaries_block=summaries_block,
        expansions_block="\n".join(lines),
    )
    return REVISER_SYSTEM, user


def parse_adjudicate_reply(text: str) -> Optional[tuple[str, Optional[str]]]:
    """Returns ("unique", expansion), ("not unique", None), or None if malformed."""
    decision: Optional[str] = None
    expansion: Optional[str] = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("DECISION:"):
            decision = stripped[len("DECISION:") :].strip().lower()
        elif stripped.startswith("EXPANSION:"):
            expansion = stripped[len("EXPANSION:") :].strip()
    if decision == "not unique":
        return ("not unique", None)
    if decision == "unique" and expansion:
        return ("unique", expansion)
    return None


def adjudicate(
    token: str,
    usages: Sequence[RuleUsage],
    group_summaries: Sequence[str],
    gateway: Gateway,
    config: ReviserConfig,
    templates: PromptTemplates,
    schemas_by_name: Optional[Mapping[str, TableSchema]] = None,
) -> Optional[tuple[str, str]]:
    """Ask whether ``token`` has one global expansion.

    Accepts the verdict only when the proposed expansion is one of the
    observed expansions and satisfies the subsequence requirement; numeric
    tokens may only map to themselves. Returns None otherwise.
    """
    schemas_by_name = schemas_by_name or {}
    system, user = build_adjudicate_prompt(
        token, usages, group_summaries, schemas_by_name, config, templates
    )
    parsed = parse_adjudicate_reply(gateway.ask(system, user))
    if parsed is None:
        reminder = (
            f"{user}\n\nYour previous reply was not in the required format. "
            f"Reply with a DECISION line and, when unique, an EXPANSION line."
        )
        parsed = parse_adjudicate_reply(gateway.ask(system, reminder))
        if parsed is None:
            return None
    decision, proposed = parsed
    if decision != "unique" or proposed is None:
        return None
    observed = {usage.expansion.casefold(): usage.expansion for usage in usages}
    chosen = observed.get(proposed.casefold())
    if chosen is None:
        return None
    if not is_valid_expansion(token, chosen):
        return None
    if token.isdigit() and chosen != token:
        return None
    return (token, chosen)


def apply_unique_rules(
    records: Sequence[ExpansionRecord], q_set: UniqueRuleSet
) -> list[ExpansionRecord]:
    """Rewrite every occurrence of an adjudicated token; idempotent.

    Records without any adjudicated token are returned unchanged.
    """
    out: list[ExpansionRecord] = []
    for record in records:
        hit = any(rule.token.casefold() in q_set.rules for rule in record.rules)
        if not hit:
            out.append(record)
            continue
        new_rules = tuple(
            ExpansionRule(rule.token, q_set.rules[rule.token.casefold()])
            if rule.token.casefold() in q_set.rules
            else rule
            for rule in record.rules
        )
        if new_rules == record.rules:
            out.append(record)
            continue
        out.append(
            replace(
                record,
                rules=new_rules,
                expansion=" ".join(rule.expansion for rule in new_rules),
            )
        )
    return out


def run_reviser(
    records: Sequence[ExpansionRecord],
    groups: Sequence[TableGroup],
    schemas: Sequence[TableSchema],
    config: ReviserConfig,
    gateway: Gateway,
    templates: PromptTemplates,
    parallelism: int = 4,
) -> tuple[list[ExpansionRecord], UniqueRuleSet]:
    index = build_rule_index(records)
    candidates = select_candidates(index, config.min_token_length, config.max_candidates)
    group_summaries = [g.summary for g in groups] if config.include_group_summaries else []
    schemas_by_name = {s.name: s for s in schemas}
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        verdicts = list(
            pool.map(
                lambda token: adjudicate(
                    token,
                    index.entries[token],
                    group_summaries,
                    gateway,
                    config,
                    templates,
                    schemas_by_name,
                ),
                candidates,
            )
        )
    q_set = UniqueRuleSet(rules=dict(v for v in verdicts if v is not None))
    return apply_unique_rules(records, q_set), q_set
