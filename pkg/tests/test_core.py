"""Domain model, validation and causal graph tests."""

import pytest

from tests.conftest import SCHEMA, make_log, make_record
from wpultr.core import (
    CLICK,
    REL,
    CausalGraph,
    CyclicGraphError,
    Edge,
    EdgeMark,
    FeatureKind,
    FeatureSchema,
    FeatureSpec,
    GraphError,
    SchemaMismatchError,
    ValidationError,
    group_queries,
    validate_log,
)
from wpultr.core.validation import RULE_BUCKET, RULE_CLICK, RULE_GRADE, RULE_RANK, RULE_UNIQUE_RANK


# =============================================================================
# Schema
# =============================================================================

class TestFeatureSpec:
    def test_declaration_roundtrip(self):
        spec = FeatureSpec("media", FeatureKind.CATEGORICAL, 3)
        assert spec.declaration() == "media:categorical:3"
        assert FeatureSpec.parse("media:categorical:3") == spec
        assert FeatureSpec.parse("height:continuous").cardinality is None

    def test_reserved_names_rejected(self):
        with pytest.raises(ValidationError):
            FeatureSpec(REL, FeatureKind.CONTINUOUS)
        with pytest.raises(ValidationError):
            FeatureSpec(CLICK, FeatureKind.ORDINAL, 3)

    def test_discrete_needs_cardinality(self):
        with pytest.raises(ValidationError):
            FeatureSpec("position", FeatureKind.ORDINAL)
        with pytest.raises(ValidationError):
            FeatureSpec("media", FeatureKind.CATEGORICAL, 1)
        with pytest.raises(ValidationError):
            FeatureSpec("height", FeatureKind.CONTINUOUS, 4)

    def test_bad_declaration(self):
        with pytest.raises(SchemaMismatchError):
            FeatureSpec.parse("height")
        with pytest.raises(SchemaMismatchError):
            FeatureSpec.parse("height:fuzzy")

    def test_schema_rejects_duplicates(self):
        spec = FeatureSpec("height", FeatureKind.CONTINUOUS)
        with pytest.raises(ValidationError):
            FeatureSchema((spec, spec))

    def test_schema_subset_keeps_order(self):
        assert SCHEMA.subset(["height", "position"]).names == ("position", "height")


# =============================================================================
# Click logs
# =============================================================================

class TestClickLog:
    def test_grouping_is_contiguous_and_sorted(self):
        records = [
            make_record("q2", "a", rank=2),
            make_record("q1", "b", rank=2),
            make_record("q2", "c", rank=1),
            make_record("q1", "d", rank=1),
        ]
        log = group_queries(records, SCHEMA)
        assert log.query_ids == ("q1", "q2")
        assert [r.doc_id for r in log.group("q1")] == ["d", "b"]
        assert [r.doc_id for r in log.group("q2")] == ["c", "a"]
        assert validate_log(log) == []

    def test_grouping_ignores_input_order(self):
        log = make_log()
        shuffled = group_queries(reversed(log.records), SCHEMA)
        assert shuffled.records == log.records

    def test_ranked_lists_split_sessions(self):
        records = [make_record("q", f"d{k}", rank=k + 1, session=s)
                   for s in range(2) for k in range(3)]
        lists = list(group_queries(records, SCHEMA).ranked_lists())
        assert len(lists) == 2
        assert all(len(lst) == 3 for lst in lists)

    def test_mismatched_sepp_keys(self):
        bad = make_record()
        with pytest.raises(SchemaMismatchError):
            group_queries([bad], SCHEMA.subset(["position"]))

    def test_mixed_doc_feature_lengths(self):
        with pytest.raises(SchemaMismatchError):
            group_queries([make_record(doc_id="a", features=(1.0,)),
                           make_record(doc_id="b", rank=2, features=(1.0, 2.0))], SCHEMA)

    def test_flags(self):
        assert make_log().has_grades and make_log().has_logged_scores
        assert not make_log(graded=False).has_grades
        assert not make_log(scored=False).has_logged_scores

    def test_select_and_restrict(self):
        log = make_log()
        assert set(log.select_queries(["q1"]).query_ids) == {"q1"}
        narrow = log.restrict_schema(["media"])
        assert narrow.schema.names == ("media",)
        assert set(narrow.records[0].sepp_values) == {"media"}


class TestValidation:
    def test_valid_log(self, tiny_log):
        assert validate_log(tiny_log) == []

    @pytest.mark.parametrize("field,value,rule", [
        ("rank", 0, RULE_RANK),
        ("click", 2, RULE_CLICK),
        ("grade", 5, RULE_GRADE),
        ("bucket", 10, RULE_BUCKET),
    ])
    def test_record_rules(self, field, value, rule):
        log = group_queries([make_record(**{field: value})], SCHEMA)
        assert rule in {v.rule for v in validate_log(log)}

    def test_categorical_out_of_range(self):
        log = group_queries([make_record(media=2)], SCHEMA)
        violations = validate_log(log)
        assert len(violations) == 1
        assert "media=2" in str(violations[0])

    def test_duplicate_rank(self):
        log = group_queries([make_record(doc_id="a"), make_record(doc_id="b")], SCHEMA)
        assert RULE_UNIQUE_RANK in {v.rule for v in validate_log(log)}


# =============================================================================
# Causal graphs
# =============================================================================

class TestCausalGraph:
    def graph(self):
        return CausalGraph(
            (REL, CLICK, "position", "media"),
            {Edge(REL, CLICK), Edge(REL, "position"), Edge("position", CLICK),
             Edge("media", CLICK, EdgeMark.UNDIRECTED)},
        )

    def test_queries(self):
        g = self.graph()
        assert g.parents(CLICK) == (REL, "position")
        assert g.children(REL) == (CLICK, "position")
        assert g.has_undirected("media", CLICK) and g.has_undirected(CLICK, "media")
        assert g.has_directed_path(REL, CLICK)
        assert not g.has_directed_path(CLICK, REL)
        assert g.feature_nodes == ("position", "media")
        assert g.edge_strings() == {"REL→CLICK", "REL→position", "position→CLICK", "CLICK—media"}

    def test_cycle_rejected(self):
        with pytest.raises(CyclicGraphError):
            CausalGraph(("a", "b", "c"), {Edge("a", "b"), Edge("b", "c"), Edge("c", "a")})
        with pytest.raises(CyclicGraphError):
            self.graph().with_edge(CLICK, REL)

    def test_structure_errors(self):
        with pytest.raises(GraphError):
            CausalGraph(("a",), {Edge("a", "a")})
        with pytest.raises(GraphError):
            CausalGraph(("a", "b"), {Edge("a", "b"), Edge("b", "a", EdgeMark.UNDIRECTED)})
        with pytest.raises(GraphError):
            CausalGraph(("a",), {Edge("a", "z")})

    def test_json_roundtrip(self):
        g = self.graph()
        assert CausalGraph.from_json(g.to_json()) == g
        with pytest.raises(GraphError):
            CausalGraph.from_dict({"edges": []})

    def test_shd(self):
        g = self.graph()
        assert g.structural_hamming_distance(g) == 0
        # reorientation, deletion and insertion count once each
        other = g.with_edge("position", REL).without_edge("media", CLICK)
        other = other.with_edge(REL, "media")
        assert g.structural_hamming_distance(other) == 3
        assert other.structural_hamming_distance(g) == 3

    def test_induced(self):
        sub = self.graph().induced([REL, CLICK])
        assert sub.nodes == (REL, CLICK)
        assert sub.edge_strings() == {"REL→CLICK"}
