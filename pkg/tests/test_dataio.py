"""Unit tests for the file formats: schemas, gold labels, synonyms, records."""

from __future__ import annotations

import json

import pytest

from colexpand.dataio import (
    DatasetError,
    GoldLabel,
    load_gold,
    load_schemas,
    load_synonyms,
    read_expansion_records,
    write_expansion_records,
    write_gold,
    write_schemas,
)
from colexpand.model import build_record


def write_lines(path, payloads):
    with open(path, "w", encoding="utf-8") as handle:
        for payload in payloads:
            handle.write(json.dumps(payload) + "\n")


class TestSchemas:
    def test_load_basic(self, tmp_path):
        path = tmp_path / "schemas.jsonl"
        write_lines(path, [{"table_name": "EMPS", "columns": ["eName", "eSal", "eDTPh"]}])
        schemas = load_schemas(path)
        assert len(schemas) == 1
        assert schemas[0].name == "EMPS"
        assert schemas[0].column_names() == ["eName", "eSal", "eDTPh"]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "schemas.jsonl"
        path.write_text("")
        assert load_schemas(path) == []

    def test_order_preserved(self, tmp_path):
        path = tmp_path / "schemas.jsonl"
        names = [f"T{i}" for i in range(10)]
        write_lines(path, [{"table_name": n, "columns": ["c"]} for n in names])
        assert [s.name for s in load_schemas(path)] == names

    def test_no_columns_rejected(self, tmp_path):
        path = tmp_path / "schemas.jsonl"
        write_lines(path, [{"table_name": "T", "columns": []}])
        with pytest.raises(DatasetError, match="has no columns"):
            load_schemas(path)

    def test_duplicate_table_rejected(self, tmp_path):
        path = tmp_path / "schemas.jsonl"
        write_lines(path, [
            {"table_name": "T", "columns": ["a"]},
            {"table_name": "T", "columns": ["b"]},
        ])
        with pytest.raises(DatasetError, match="duplicate table"):
            load_schemas(path)

    def test_duplicate_column_rejected(self, tmp_path):
        path = tmp_path / "schemas.jsonl"
        write_lines(path, [{"table_name": "T", "columns": ["a", "a"]}])
        with pytest.raises(DatasetError, match="duplicate column"):
            load_schemas(path)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "schemas.jsonl"
        path.write_text('{"table_name": "T", "columns": ["a"]}\nnot json\n')
        with pytest.raises(DatasetError, match=":2:"):
            load_schemas(path)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "schemas.jsonl"
        write_lines(path, [
            {"table_name": "A", "columns": ["x", "y"], "summary": "Stores points"},
            {"table_name": "B", "columns": ["z"]},
        ])
        schemas = load_schemas(path)
        out = tmp_path / "out.jsonl"
        write_schemas(schemas, out)
        assert load_schemas(out) == schemas


class TestGold:
    def test_load_basic(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        write_lines(path, [{"table_name": "EMPS", "column": "eSal", "gold": "employee salary"}])
        labels = load_gold(path)
        assert labels == [GoldLabel("EMPS", "eSal", "employee salary", excluded=False)]

    def test_excluded_label(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        write_lines(path, [{"table_name": "T", "column": "x", "gold": "", "excluded": True}])
        labels = load_gold(path)
        assert labels[0].excluded is True
        assert labels[0].gold_expansion == ""

    def test_missing_gold_without_exclusion_rejected(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        write_lines(path, [{"table_name": "T", "column": "x", "gold": ""}])
        with pytest.raises(DatasetError, match="not excluded"):
            load_gold(path)

    def test_excluded_with_gold_rejected(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        write_lines(path, [{"table_name": "T", "column": "x", "gold": "ex", "excluded": True}])
        with pytest.raises(DatasetError, match="must not carry"):
            load_gold(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        write_lines(path, [
            {"table_name": "T", "column": "x", "gold": "a"},
            {"table_name": "T", "column": "x", "gold": "b"},
        ])
        with pytest.raises(DatasetError, match="duplicate gold"):
            load_gold(path)

    def test_round_trip(self, tmp_path):
        labels = [
            GoldLabel("T", "a", "alpha"),
            GoldLabel("T", "b", "", excluded=True),
        ]
        path = tmp_path / "gold.jsonl"
        write_gold(labels, path)
        assert load_gold(path) == labels


class TestSynonyms:
    def test_single_class(self, tmp_path):
        path = tmp_path / "syn.txt"
        path.write_text("geography = geographical\n")
        lex = load_synonyms(path)
        assert lex.classes == (frozenset({"geography", "geographical"}),)

    def test_transitive_merge_across_lines(self, tmp_path):
        path = tmp_path / "syn.txt"
        path.write_text("a=b\nb=c\n")
        lex = load_synonyms(path)
        assert lex.classes == (frozenset({"a", "b", "c"}),)

    def test_single_phrase_rejected(self, tmp_path):
        path = tmp_path / "syn.txt"
        path.write_text("photo\n")
        with pytest.raises(DatasetError):
            load_synonyms(path)

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "syn.txt"
        path.write_text("# lexicon\n\nphoto = picture  # images\n")
        lex = load_synonyms(path)
        assert lex.classes == (frozenset({"photo", "picture"}),)

    def test_merge_is_idempotent(self, tmp_path):
        path = tmp_path / "syn.txt"
        path.write_text("a=b\nb=c\na=c\n")
        lex = load_synonyms(path)
        assert lex.classes == (frozenset({"a", "b", "c"}),)


class TestExpansionRecords:
    def _records(self):
        return [
            build_record("EMPS", "eSal", ["e", "Sal"], [""], ["Employee", "Salary"]),
            build_record("EMPS", "eDTPh", ["e", "DT", "Ph"], ["", ""],
                         ["Employee", "Day Time", "Phone"]),
        ]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "records.jsonl"
        records = self._records()
        write_expansion_records(records, path)
        assert read_expansion_records(path) == records

    def test_zero_records_writes_empty_file(self, tmp_path):
        path = tmp_path / "records.jsonl"
        write_expansion_records([], path)
        assert path.read_text() == ""
        assert read_expansion_records(path) == []

    def test_read_validates_invariants(self, tmp_path):
        path = tmp_path / "records.jsonl"
        payload = {
            "table": "T",
            "column": "dt",
            "tokens": ["dt"],
            "delimiters": [],
            "rules": [{"token": "dt", "expansion": "date"}],
            "expansion": "data",  # does not match the joined rules
        }
        path.write_text(json.dumps(payload) + "\n")
        with pytest.raises(DatasetError, match="differs from"):
            read_expansion_records(path)

    def test_duplicate_record_rejected(self, tmp_path):
        path = tmp_path / "records.jsonl"
        records = [self._records()[0], self._records()[0]]
        write_expansion_records(records, path)
        with pytest.raises(DatasetError, match="duplicate record"):
            read_expansion_records(path)
