"""Core domain objects for abbreviated column names and their expansions.

A column name is an interleaving of tokens and delimiters; each token
carries an expansion rule whose phrase must contain the token's characters
in order (case-insensitively). An ExpansionRecord bundles one column's
tokenization, per-token rules, and the assembled full expansion.

Tokenizations are produced elsewhere (by the LLM); this module only
validates them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

#: Characters permitted between tokens. The empty string covers camelCase
#: style splits ("eSal" -> "e" + "Sal").
ALLOWED_DELIMITERS = ("_", "-", " ", ".", "")

#: Single-character delimiters, for scanning raw names.
DELIMITER_CHARS = "".join(d for d in ALLOWED_DELIMITERS if d)


class AlignmentError(ValueError):
    """A record's rules do not line up one-to-one with its tokens."""


class InvalidRecordError(ValueError):
    """A record violates a structural invariant; carries the reasons."""

    def __init__(self, message: str, reasons: Sequence[str] = ()):
        super().__init__(message)
        self.reasons = list(reasons)


@dataclass(frozen=True)
class ColumnName:
    """A column name exactly as it appears in the schema."""

    raw: str

    def __post_init__(self) -> None:
        if not self.raw or not self.raw.strip():
            raise ValueError("column name must be non-empty")


@dataclass(frozen=True)
class TokenSequence:
    """A parse of a column name into tokens separated by delimiters.

    There is always one fewer delimiter than tokens; interleaving them in
    order must reproduce the raw column name character for character.
    """

    tokens: tuple[str, ...]
    delimiters: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "delimiters", tuple(self.delimiters))
        if not self.tokens:
            raise ValueError("token sequence needs at least one token")
        if any(not t for t in self.tokens):
            raise ValueError("tokens must be non-empty")
        if len(self.delimiters) != len(self.tokens) - 1:
            raise ValueError(
                f"expected {len(self.tokens) - 1} delimiters for "
                f"{len(self.tokens)} tokens, got {len(self.delimiters)}"
            )
        bad = [d for d in self.delimiters if d not in ALLOWED_DELIMITERS]
        if bad:
            raise ValueError(f"delimiters not allowed: {bad!r}")

    def reconstruct(self) -> str:
        """Interleave tokens and delimiters back into the raw name."""
        parts = [self.tokens[0]]
        for delim, token in zip(self.delimiters, self.tokens[1:]):
            parts.append(delim)
            parts.append(token)
        return "".join(parts)


@dataclass(frozen=True)
class ExpansionRule:
    """One token and the English phrase it stands for."""

    token: str
    expansion: str


@dataclass(frozen=True)
class ExpansionRecord:
    """A column's tokenization, per-token rules, and assembled expansion."""

    table_name: str
    column: ColumnName
    token_sequence: TokenSequence
    rules: tuple[ExpansionRule, ...]
    expansion: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))


@dataclass(frozen=True)
class TableSchema:
    """An input table: its name and ordered column names.

    ``summary`` is a short description filled in by the summarizer stage.
    """

    name: str
    columns: tuple[ColumnName, ...]
    summary: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        if not self.name or not self.name.strip():
            raise ValueError("table name must be non-empty")
        seen = set()
        for col in self.columns:
            if col.raw in seen:
                raise ValueError(
                    f"duplicate column {col.raw!r} in table {self.name!r}"
                )
            seen.add(col.raw)

    def column_names(self) -> list[str]:
        return [c.raw for c in self.columns]


@dataclass(frozen=True)
class TableGroup:
    """A cluster of related tables sharing one group summary."""

    id: str
    summary: str
    members: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        if not self.summary or not self.summary.strip():
            raise ValueError("group summary must be non-empty")
        if not self.members:
            raise ValueError("group must have at least one member")


def validate_token_sequence(column: ColumnName, seq: TokenSequence) -> bool:
    """True iff interleaving ``seq`` reproduces ``column.raw`` exactly."""
    return seq.reconstruct() == column.raw


def _is_subsequence(needle: str, haystack: str) -> bool:
    it = iter(haystack)
    return all(ch in it for ch in needle)


def is_valid_expansion(token: str, expansion: str) -> bool:
    """True iff ``token`` is a case-insensitive subsequence of ``expansion``.

    Spaces and punctuation inside the expansion count as ordinary
    characters to skip over.
    """
    if not token:
        raise ValueError("token must be non-empty")
    return _is_subsequence(token.casefold(), expansion.casefold())


def rule_errors(rule: ExpansionRule) -> list[str]:
    """Human-readable violations for one expansion rule (empty if valid)."""
    errors = []
    if not rule.token:
        return ["empty token"]
    if not rule.expansion or not rule.expansion.strip():
        errors.append(f"token {rule.token!r} has an empty expansion")
    elif not is_valid_expansion(rule.token, rule.expansion):
        errors.append(
            f"expansion {rule.expansion!r} does not contain the characters "
            f"of token {rule.token!r} in order"
        )
    if rule.token.isdigit() and rule.expansion != rule.token:
        errors.append(
            f"numeric token {rule.token!r} must expand to itself, "
            f"got {rule.expansion!r}"
        )
    return errors


def assemble_expansion(record: ExpansionRecord) -> str:
    """Join the record's rule expansions with single spaces.

    Raises AlignmentError when the rules do not line up with the tokens.
    """
    tokens = record.token_sequence.tokens
    if len(record.rules) != len(tokens):
        raise AlignmentError(
            f"{len(record.rules)} rules for {len(tokens)} tokens "
            f"in column {record.column.raw!r}"
        )
    return " ".join(rule.expansion for rule in record.rules)


def record_errors(record: ExpansionRecord) -> list[str]:
    """All invariant violations for a record (empty list means valid)."""
    errors = []
    tokens = record.token_sequence.tokens
    if not validate_token_sequence(record.column, record.token_sequence):
        errors.append(
            f"tokens {list(tokens)!r} with delimiters "
            f"{list(record.token_sequence.delimiters)!r} do not reconstruct "
            f"{record.column.raw!r}"
        )
    if len(record.rules) != len(tokens):
        errors.append(
            f"{len(record.rules)} rules for {len(tokens)} tokens"
        )
        return errors
    expansions_by_token: dict[str, str] = {}
    for i, (token, rule) in enumerate(zip(tokens, record.rules)):
        if rule.token != token:
            errors.append(
                f"rule {i + 1} is for token {rule.token!r} but position "
                f"{i + 1} holds token {token!r}"
            )
            continue
        errors.extend(rule_errors(rule))
        previous = expansions_by_token.get(rule.token)
        if previous is not None and previous != rule.expansion:
            errors.append(
                f"token {rule.token!r} is expanded both as {previous!r} "
                f"and {rule.expansion!r} within one column"
            )
        expansions_by_token.setdefault(rule.token, rule.expansion)
    if not errors:
        joined = " ".join(rule.expansion for rule in record.rules)
        if record.expansion != joined:
            errors.append(
                f"stored expansion {record.expansion!r} differs from the "
                f"joined rule expansions {joined!r}"
            )
    return errors


def build_record(
    table_name: str,
    raw: str,
    tokens: Sequence[str],
    delimiters: Sequence[str],
    expansions: Sequence[str],
) -> ExpansionRecord:
    """Construct a validated record; raises InvalidRecordError otherwise."""
    if len(expansions) != len(tokens):
        raise InvalidRecordError(
            f"column {raw!r}: {len(expansions)} expansions for "
            f"{len(tokens)} tokens",
            [f"{len(expansions)} expansions for {len(tokens)} tokens"],
        )
    column = ColumnName(raw)
    seq = TokenSequence(tuple(tokens), tuple(delimiters))
    rules = tuple(
        ExpansionRule(token, expansion)
        for token, expansion in zip(tokens, expansions)
    )
    record = ExpansionRecord(
        table_name=table_name,
        column=column,
        token_sequence=seq,
        rules=rules,
        expansion=" ".join(expansions),
    )
    errors = record_errors(record)
    if errors:
        raise InvalidRecordError(
            f"invalid record for column {raw!r}: " + "; ".join(errors),
            errors,
        )
    return record


def derive_delimiters(raw: str, tokens: Sequence[str]) -> Optional[tuple[str, ...]]:
    """Find delimiters that interleave ``tokens`` back into ``raw``.

    Returns None when no assignment over the allowed delimiter set exists.
    Prefers the empty delimiter at each junction, backtracking to a
    single-character delimiter when needed.
    """
    tokens = list(tokens)
    if not tokens or any(not t for t in tokens):
        return None

    def search(pos: int, idx: int, acc: list[str]) -> Optional[list[str]]:
        token = tokens[idx]
        if not raw.startswith(token, pos):
            return None
        end = pos + len(token)
        if idx == len(tokens) - 1:
            return acc if end == len(raw) else None
        found = search(end, idx + 1, acc + [""])
        if found is not None:
            return found
        if end < len(raw) and raw[end] in DELIMITER_CHARS:
            return search(end + 1, idx + 1, acc + [raw[end]])
        return None

    result = search(0, 0, [])
    return tuple(result) if result is not None else None
