"""Unit tests for clustering, parsing, merging, and batching."""

from __future__ import annotations

import pytest

from colexpand.gateway import Gateway
from colexpand.model import ColumnName, TableGroup, TableSchema
from colexpand.prompts import PromptTemplates, SUMMARIZER_SYSTEM
from colexpand.summarizer import (
    SummarizerConfig,
    SummarizerError,
    build_cluster_prompt,
    global_merge,
    parse_cluster_reply,
    run_summarizer,
    summarize_batch,
)
from fakes import FakeLLM, render_cluster_reply


def schema(name, columns=("c1", "c2")):
    return TableSchema(name, tuple(ColumnName(c) for c in columns))


TEMPLATES = PromptTemplates()


class TestPrompt:
    def test_prompt_lists_tables_with_columns(self):
        system, user = build_cluster_prompt(
            [schema("EMPS", ("eName", "eSal", "eDTPh"))], TEMPLATES
        )
        assert system == SUMMARIZER_SYSTEM
        assert "EMPS(eName, eSal, eDTPh)" in user


class TestParse:
    def test_ten_tables_into_five_groups(self):
        # mirrors the sample clustering output shape: groups of 2, 3, 3, 1, 1
        names = [f"T{i}" for i in range(10)]
        reply = render_cluster_reply([
            ("System Metadata", [(n, f"Holds {n}") for n in names[:2]]),
            ("Geographic and Address Data", [(n, f"Holds {n}") for n in names[2:5]]),
            ("Business Entity Structure", [(n, f"Holds {n}") for n in names[5:8]]),
            ("Sales", [(names[8], "Holds sales")]),
            ("Inventory", [(names[9], "Holds stock")]),
        ])
        parsed = parse_cluster_reply(reply, names)
        assert [len(members) for _, members in parsed] == [2, 3, 3, 1, 1]
        assert parsed[0][0] == "System Metadata"

    def test_table_summary_preserved(self):
        reply = render_cluster_reply([
            ("Business Entity Structure", [(
                "BusinessEntity",
                "Represents a generic business entity that can be a person, vendor, or customer",
            )]),
        ])
        parsed = parse_cluster_reply(reply, ["BusinessEntity"])
        assert parsed[0][1][0][1].startswith("Represents a generic business entity")

    def test_missing_table_rejected(self):
        reply = render_cluster_reply([("G", [("A", "s")])])
        with pytest.raises(ValueError, match="missing"):
            parse_cluster_reply(reply, ["A", "B"])

    def test_duplicate_assignment_rejected(self):
        reply = render_cluster_reply([("G", [("A", "s")]), ("H", [("A", "s")])])
        with pytest.raises(ValueError, match="twice"):
            parse_cluster_reply(reply, ["A"])

    def test_unknown_table_rejected(self):
        reply = render_cluster_reply([("G", [("Z", "s")])])
        with pytest.raises(ValueError, match="unknown"):
            parse_cluster_reply(reply, ["A"])

    def test_table_before_group_rejected(self):
        with pytest.raises(ValueError, match="before any GROUP"):
            parse_cluster_reply("TABLE: A :: s", ["A"])


class TestSummarizeBatch:
    def test_single_table_single_group(self):
        tables = [schema("ONLY")]
        fake = FakeLLM(cluster_reply=render_cluster_reply([("Lone", [("ONLY", "The only table")])]))
        groups, summaries = summarize_batch(tables, SummarizerConfig(), Gateway(fake), TEMPLATES)
        assert len(groups) == 1
        assert groups[0].members == ("ONLY",)
        assert summaries == {"ONLY": "The only table"}

    def test_malformed_reply_retries_once_then_errors(self):
        class Garbage:
            def __init__(self):
                self.calls = 0

            def send(self, request):
                self.calls += 1
                return "no structure here"

        provider = Garbage()
        with pytest.raises(SummarizerError):
            summarize_batch([schema("A")], SummarizerConfig(), Gateway(provider), TEMPLATES)
        assert provider.calls == 2

    def test_retry_recovers_on_second_reply(self):
        good = render_cluster_reply([("G", [("A", "summary")])])

        class FlakyFormat:
            def __init__(self):
                self.calls = 0

            def send(self, request):
                self.calls += 1
                return "garbage" if self.calls == 1 else good

        groups, _ = summarize_batch(
            [schema("A")], SummarizerConfig(), Gateway(FlakyFormat()), TEMPLATES
        )
        assert groups[0].summary == "G"

    def test_summary_word_cap_truncates(self):
        long_summary = " ".join(f"w{i}" for i in range(60))
        fake = FakeLLM(cluster_reply=render_cluster_reply([("G", [("A", long_summary)])]))
        config = SummarizerConfig(summary_word_cap=40)
        _, summaries = summarize_batch([schema("A")], config, Gateway(fake), TEMPLATES)
        assert len(summaries["A"].split()) == 40


class TestGlobalMerge:
    def test_equal_summaries_union_members(self):
        merged = global_merge([
            TableGroup("b0.g0", "Business Entity Structure", ("A", "B")),
            TableGroup("b1.g0", "Business Entity Structure", ("C",)),
        ])
        assert len(merged) == 1
        assert merged[0].members == ("A", "B", "C")

    def test_distinct_summaries_untouched(self):
        groups = [TableGroup("g0", "One", ("A",)), TableGroup("g1", "Two", ("B",))]
        assert global_merge(groups) == groups

    def test_merge_is_case_and_whitespace_insensitive(self):
        # normalization oracle: lowercase/trim comparison
        merged = global_merge([
            TableGroup("g0", "Sales Data", ("A",)),
            TableGroup("g1", "sales  data", ("B",)),
        ])
        assert len(merged) == 1
        assert merged[0].summary == "Sales Data"  # first-seen casing
        assert merged[0].members == ("A", "B")

    def test_merged_summaries_pairwise_distinct(self):
        merged = global_merge([
            TableGroup("g0", "A b", ("T1",)),
            TableGroup("g1", "a B", ("T2",)),
            TableGroup("g2", "C", ("T3",)),
        ])
        normalized = [" ".join(g.summary.split()).lower() for g in merged]
        assert len(normalized) == len(set(normalized))


class TestRunSummarizer:
    def _fake_for(self, tables):
        # every batch clusters into one group named after its first table
        class PerBatch:
            def __init__(self):
                self.calls = []

            def send(self, request):
                self.calls.append(request)
                names = [
                    line.split("(")[0]
                    for line in request.user_text.splitlines()
                    if "(" in line and line.endswith(")")
                ]
                return render_cluster_reply(
                    [(f"Topic {names[0]}", [(n, f"About {n}") for n in names])]
                )

        return PerBatch()

    def test_ceiling_partition_batches(self):
        tables = [schema(f"T{i:02d}") for i in range(65)]
        provider = self._fake_for(tables)
        config = SummarizerConfig(batch_size_k=30)
        groups, annotated = run_summarizer(tables, config, Gateway(provider), TEMPLATES)
        batch_sizes = [
            sum(1 for line in call.user_text.splitlines()
                if "(" in line and line.endswith(")"))
            for call in provider.calls
        ]
        assert sorted(batch_sizes, reverse=True) == [30, 30, 5]
        assert all(s.summary for s in annotated)

    def test_k_is_configurable(self):
        tables = [schema(f"T{i:02d}") for i in range(65)]
        provider = self._fake_for(tables)
        run_summarizer(tables, SummarizerConfig(batch_size_k=20),
                       Gateway(provider), TEMPLATES)
        assert len(provider.calls) == 4  # ceil(65/20)

    def test_groups_partition_tables(self):
        tables = [schema(f"T{i:02d}") for i in range(7)]
        provider = self._fake_for(tables)
        groups, _ = run_summarizer(
            tables, SummarizerConfig(batch_size_k=3), Gateway(provider), TEMPLATES
        )
        assigned = [m for g in groups for m in g.members]
        assert sorted(assigned) == sorted(t.name for t in tables)
        assert len(assigned) == len(set(assigned))

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            run_summarizer([], SummarizerConfig(), Gateway(FakeLLM()), TEMPLATES)
