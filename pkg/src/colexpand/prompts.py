"""Prompt templates, system texts, rules, and few-shot exemplars.

Every template can be overridden by dropping a same-named .txt file into a
prompts directory (see load_templates). Templates use ``string.Template``
placeholders so braces in schema text never break substitution.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

PathLike = Union[str, Path]

SUMMARIZER_SYSTEM = (
    "You organize database table schemas into topic groups and write concise summaries."
)
GENERATOR_SYSTEM = (
    "You expand abbreviated column names from database tables into full English phrases."
)
REVISER_SYSTEM = (
    "You decide whether an abbreviated token should always expand to the same phrase "
    "across a data lake."
)

SUMMARIZER_TEMPLATE = """\
You are given ${table_count} table schemas from a data lake. Cluster related
tables into groups. Reply with one section per group, in exactly this format
and nothing else:

GROUP: <short phrase naming the group topic>
TABLE: <table name> :: <one-sentence summary of what the table holds>

Every input table must appear on exactly one TABLE line, with its name spelled
exactly as given. Do not invent tables.

Tables:
${tables_block}
"""

GENERATOR_TEMPLATE = """\
${context_block}${rules_block}Expand each abbreviated column name below into a full English phrase by
splitting it into tokens and expanding every token. The expansion of a token
must contain the token's characters in order.

Reply with one block per column, in exactly this format:

COLUMN: <column name exactly as given>
TOKENS: <token 1> | <token 2> | ...
RULE: <token> -> <expansion>
EXPANSION: <the token expansions joined by single spaces>

Give one RULE line per token, in token order.${cot_instruction}

${exemplars_block}Columns to expand (${column_count}):
${columns_block}
"""

GENERATOR_BASELINE_TEMPLATE = """\
Expand each abbreviated database column name below into a full English phrase.
For example, the column name c_name expands to customer name.

Reply with one block per column, in exactly this format:

COLUMN: <column name exactly as given>
TOKENS: <token 1> | <token 2> | ...
RULE: <token> -> <expansion>
EXPANSION: <the token expansions joined by single spaces>

Give one RULE line per token, in token order.

Columns to expand (${column_count}):
${columns_block}
"""

REVISER_TEMPLATE = """\
Across a data lake, the token "${token}" appears in many column names and has
been expanded in more than one way.

${group_summaries_block}Observed expansion rules for "${token}":
${expansions_block}

Decide whether "${token}" should always expand to a single phrase everywhere in
this lake. If it should, reply in exactly this format:

DECISION: unique
EXPANSION: <the single correct expansion>

If different tables legitimately need different expansions, reply with exactly:

DECISION: not unique
"""

COT_INSTRUCTION = (
    "\nBefore each block, reason briefly about how the column name splits into "
    "tokens and what each token stands for in this table's domain."
)

#: The first three rules are the load-bearing ones; the rest keep the output
#: format and token discipline tight.
DEFAULT_RULES = (
    "Expand all abbreviations in a column name.",
    "Do not expand numbers.",
    "Do not add extra words or explanations.",
    "Provide an expansion for every token.",
    "Keep the tokens in their original order.",
    "Output only the structured blocks in the required format.",
    "Use the table context to choose between candidate expansions.",
    "Prefer the expansion that is standard in the table's domain.",
    "Give each token exactly one expansion within a column.",
)

EXEMPLARS_COT = """\
Examples:

Reasoning: "custAddr" splits into "cust" and "Addr". In a customer table, "cust" stands for "Customer" and "Addr" for "Address".
COLUMN: custAddr
TOKENS: cust | Addr
RULE: cust -> Customer
RULE: Addr -> Address
EXPANSION: Customer Address

Reasoning: "ord_no" splits on the underscore into "ord" and "no". "ord" stands for "Order" and "no" for "Number".
COLUMN: ord_no
TOKENS: ord | no
RULE: ord -> Order
RULE: no -> Number
EXPANSION: Order Number

Reasoning: "qty2024" splits into "qty" and "2024". "qty" stands for "Quantity" and the number 2024 stays unchanged.
COLUMN: qty2024
TOKENS: qty | 2024
RULE: qty -> Quantity
RULE: 2024 -> 2024
EXPANSION: Quantity 2024
"""

EXEMPLARS_DIRECT = """\
Examples:

COLUMN: custAddr
TOKENS: cust | Addr
RULE: cust -> Customer
RULE: Addr -> Address
EXPANSION: Customer Address

COLUMN: ord_no
TOKENS: ord | no
RULE: ord -> Order
RULE: no -> Number
EXPANSION: Order Number

COLUMN: qty2024
TOKENS: qty | 2024
RULE: qty -> Quantity
RULE: 2024 -> 2024
EXPANSION: Quantity 2024
"""


@dataclass(frozen=True)
class PromptTemplates:
    summarizer: str = SUMMARIZER_TEMPLATE
    generator: str = GENERATOR_TEMPLATE
    generator_baseline: str = GENERATOR_BASELINE_TEMPLATE
    reviser: str = REVISER_TEMPLATE
    exemplars_cot: str = EXEMPLARS_COT
    exemplars_direct: str = EXEMPLARS_DIRECT
    rules: tuple[str, ...] = DEFAULT_RULES


_TEMPLATE_FILES = {
    "summarizer": "summarizer.txt",
    "generator": "generator.txt",
    "generator_baseline": "generator_baseline.txt",
    "reviser": "reviser.txt",
    "exemplars_cot": "exemplars_cot.txt",
    "exemplars_direct": "exemplars_direct.txt",
}


def load_templates(prompts_dir: Optional[PathLike] = None) -> PromptTemplates:
    """Defaults overlaid with any .txt files found in ``prompts_dir``.

    rules.txt, when present, must hold exactly 9 non-comment lines.
    """
    if prompts_dir is None:
        return PromptTemplates()
    base = Path(prompts_dir)
    overrides: dict = {}
    for field_name, filename in _TEMPLATE_FILES.items():
        path = base / filename
        if path.exists():
            overrides[field_name] = path.read_text(encoding="utf-8")
    rules_path = base / "rules.txt"
    if rules_path.exists():
        lines = [
            line.strip()
            for line in rules_path.read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.strip().startswith("#")
        ]
        if len(lines) != 9:
            raise ValueError(
                f"{rules_path}: expected exactly 9 rules, found {len(lines)}"
            )
        overrides["rules"] = tuple(lines)
    return PromptTemplates(**overrides)
