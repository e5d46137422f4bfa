"""colexpand: expand abbreviated table column names into English phrases.

A three-stage LLM pipeline (summarize table groups, generate token-level
expansions, revise inconsistent rules) plus synonym-aware accuracy metrics
for scoring predictions against gold expansions.
"""

from .dataio import (
    DatasetError,
    GoldLabel,
    load_gold,
    load_schemas,
    load_synonyms,
    read_expansion_records,
    write_expansion_records,
    write_gold,
    write_report,
    write_schemas,
)
from .evaluator import (
    ColumnScore,
    MetricReport,
    NoEvaluableColumnsError,
    evaluate_records,
    render_report_text,
)
from .gateway import (
    AuthenticationError,
    CompletionRequest,
    CompletionResponse,
    Gateway,
    GatewayError,
    HttpChatProvider,
    MockMissError,
    MockProvider,
    RetryExhaustedError,
    mock_key,
)
from .generator import GeneratorConfig, build_context, expand_batch, run_generator
from .metrics import (
    SynonymLexicon,
    TrigramEmbedder,
    canonicalize,
    embedding_f1,
    exact_match,
    gold_variations,
    make_embedder,
    normalize,
    synonym_aware_em,
    synonym_aware_embedding_f1,
    synonym_aware_word_f1,
    word_f1,
)
from .model import (
    ColumnName,
    ExpansionRecord,
    ExpansionRule,
    InvalidRecordError,
    TableGroup,
    TableSchema,
    TokenSequence,
    assemble_expansion,
    build_record,
    derive_delimiters,
    is_valid_expansion,
    record_errors,
    validate_token_sequence,
)
from .pipeline import RunConfig, run_eval, run_pipeline, run_sweep
from .reviser import (
    ReviserConfig,
    RuleIndex,
    UniqueRuleSet,
    adjudicate,
    apply_unique_rules,
    build_rule_index,
    select_candidates,
    run_reviser,
)
from .summarizer import (
    SummarizerConfig,
    SummarizerError,
    global_merge,
    run_summarizer,
    summarize_batch,
)

__version__ = "0.1.0"
