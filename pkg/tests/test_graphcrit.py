#!/usr/bin/env python3
"""
Tests for DAG parsing, d-separation, mutilation and adjustment criteria
"""

import itertools
from pathlib import Path

import networkx as nx
import pytest

from selate.errors import ConfigError, DagParseError
from selate.graphcrit import (
    Criterion, Dag, Framework, Role, check_criterion, classify_table1,
    d_separated, forbidden_nodes, mutilate, parse_dag, proper_backdoor_graph,
    proper_causal_nodes,
)

SAMPLES = Path(__file__).parent / "samples"

ROLES = {"X": Role.COVARIATE, "T": Role.TREATMENT, "Y": Role.OUTCOME, "S": Role.SELECTION}
BASE_EDGES = [("X", "T"), ("X", "Y"), ("T", "Y")]

# (sample file, expected DAG framework verdict, expected S-id verdict)
TABLE1_ROWS = [
    ("table1_sel_y.dag", Framework.NO, Framework.NO),
    ("table1_sel_t.dag", Framework.YES, Framework.NO),
    ("table1_sel_x.dag", Framework.YES_WITH_EXTERNAL, Framework.YES),
    ("table1_sel_xy.dag", Framework.NO, Framework.NO),
    ("table1_sel_ty.dag", Framework.NO, Framework.NO),
    ("table1_sel_tx.dag", Framework.YES_WITH_EXTERNAL, Framework.NO),
]


def template(*selection_parents) -> Dag:
    return Dag(BASE_EDGES + [(p, "S") for p in selection_parents], ROLES)


def load(name: str) -> Dag:
    return parse_dag((SAMPLES / name).read_text())


def path_oracle_separated(graph: nx.DiGraph, a: str, b: str, z: set) -> bool:
    """Enumerate every simple path and apply the blocking rules directly"""
    skeleton = graph.to_undirected()
    activated = set(z)
    for node in z:
        activated |= nx.ancestors(graph, node)
    for path in nx.all_simple_paths(skeleton, a, b, cutoff=8):
        open_path = True
        for prev, node, nxt in zip(path, path[1:], path[2:]):
            collider = graph.has_edge(prev, node) and graph.has_edge(nxt, node)
            if collider and node not in activated:
                open_path = False
            if not collider and node in z:
                open_path = False
        if open_path:
            return False
    return True


class TestParseDag:
    """Tests for the edge-list parser"""

    def test_table1_row_graph(self):
        """Edges and roles of the Y -> S template are parsed"""
        dag = parse_dag("X -> T\nX -> Y\nT -> Y\nY -> S\n"
                        "role X = covariate\nrole T = treatment\nrole Y = outcome\nrole S = selection")
        assert len(dag) == 4
        assert dag.edges == {("X", "T"), ("X", "Y"), ("T", "Y"), ("Y", "S")}
        assert dag.treatment == "T"
        assert dag.outcome == "Y"
        assert dag.selection == "S"
        assert dag.covariates == ["X"]

    def test_sample_file_matches_constructed_graph(self):
        """The sample file equals the graph built from edges"""
        assert load("table1_sel_y.dag") == template("Y")

    def test_comments_and_blank_lines_ignored(self):
        """Comments and blank lines carry no content"""
        dag = parse_dag("# header\n\nA -> B  # trailing comment\n   \n")
        assert dag.edges == {("A", "B")}

    def test_self_loop_is_cycle(self):
        """A -> A is rejected as a cycle on line 1"""
        with pytest.raises(DagParseError) as exc_info:
            parse_dag("A -> A")
        assert exc_info.value.line == 1
        assert "cycle" in str(exc_info.value)

    def test_cycle_closing_edge_reports_line(self):
        """The edge closing a cycle is named by its line"""
        with pytest.raises(DagParseError) as exc_info:
            parse_dag("A -> B\nB -> C\nC -> A")
        assert exc_info.value.line == 3

    def test_unknown_token(self):
        """Unparseable lines are rejected"""
        with pytest.raises(DagParseError) as exc_info:
            parse_dag("A -> B\nA <- B")
        assert exc_info.value.line == 2

    def test_unknown_role(self):
        """Roles outside the vocabulary are rejected"""
        with pytest.raises(DagParseError, match="unknown role"):
            parse_dag("role A = mediator")

    def test_duplicate_treatment(self):
        """Only one treatment node is allowed"""
        with pytest.raises(DagParseError, match="duplicate"):
            parse_dag("role A = treatment\nrole B = treatment")

    def test_duplicate_role_for_node(self):
        """A node gets one role"""
        with pytest.raises(DagParseError, match="duplicate role"):
            parse_dag("role A = covariate\nrole A = outcome")

    def test_empty_input(self):
        """Empty text gives an empty graph; criteria then fail on missing roles"""
        dag = parse_dag("")
        assert len(dag) == 0
        with pytest.raises(ConfigError, match="treatment"):
            check_criterion(dag, Criterion.GACT1, [])


class TestDagConstruction:
    """Tests for Dag invariants"""

    def test_cycle_rejected(self):
        """Constructing a cyclic graph raises"""
        with pytest.raises(ConfigError, match="cycle"):
            Dag([("A", "B"), ("B", "A")])

    def test_two_selection_nodes_rejected(self):
        """At most one selection node"""
        with pytest.raises(ConfigError, match="selection"):
            Dag([("A", "S1"), ("A", "S2")], {"S1": Role.SELECTION, "S2": Role.SELECTION})

    def test_graph_is_frozen(self):
        """The underlying networkx graph cannot be mutated"""
        dag = template("Y")
        with pytest.raises(nx.NetworkXError):
            dag.graph.add_edge("S", "X")

    def test_selection_optional(self):
        """A graph without a selection node reports None"""
        dag = Dag(BASE_EDGES, {"T": Role.TREATMENT, "Y": Role.OUTCOME})
        assert dag.selection is None


class TestDSeparation:
    """Tests for d_separated"""

    def test_blocked_chain(self):
        """Chain X -> T -> Y is blocked by T"""
        dag = Dag([("X", "T"), ("T", "Y")])
        assert d_separated(dag, {"X"}, {"Y"}, {"T"})
        assert not d_separated(dag, {"X"}, {"Y"}, set())

    def test_collider(self):
        """Collider T -> S <- Y opens when S is conditioned on"""
        dag = Dag([("T", "S"), ("Y", "S")])
        assert d_separated(dag, {"T"}, {"Y"}, set())
        assert not d_separated(dag, {"T"}, {"Y"}, {"S"})

    def test_collider_descendant_activates(self):
        """Conditioning on a collider's descendant opens the path"""
        dag = Dag([("T", "S"), ("Y", "S"), ("S", "D")])
        assert not d_separated(dag, {"T"}, {"Y"}, {"D"})

    def test_direct_edge_never_separated(self):
        """S child of Y: Y and S stay dependent given T and X"""
        assert not d_separated(template("Y"), {"Y"}, {"S"}, {"T", "X"})

    def test_unknown_node(self):
        """Unknown nodes raise"""
        with pytest.raises(ConfigError, match="unknown node"):
            d_separated(template("Y"), {"Q"}, {"Y"}, set())

    def test_sets_must_be_disjoint(self):
        """Overlapping sets raise"""
        with pytest.raises(ConfigError, match="disjoint"):
            d_separated(template("Y"), {"X"}, {"Y"}, {"X"})

    def test_empty_side_is_separated(self):
        """An empty A or B is trivially separated"""
        assert d_separated(template("Y"), set(), {"Y"}, set())

    def test_agrees_with_path_oracle_exhaustively(self):
        """Every forward-edge subset of a 5-node order agrees with path enumeration"""
        nodes = ["A", "B", "C", "D", "E"]
        possible = list(itertools.combinations(nodes, 2))
        queries = [("A", "E"), ("B", "D"), ("A", "C")]
        checked = 0
        for mask in range(1 << len(possible)):
            edges = [edge for bit, edge in enumerate(possible) if mask >> bit & 1]
            dag = Dag(edges, nodes=nodes)
            graph = nx.DiGraph(dag.graph)
            for a, b in queries:
                rest = [n for n in nodes if n not in (a, b)]
                for size in range(len(rest) + 1):
                    for z in itertools.combinations(rest, size):
                        expected = path_oracle_separated(graph, a, b, set(z))
                        assert d_separated(dag, {a}, {b}, set(z)) == expected, (edges, a, b, z)
                        checked += 1
        assert checked == 1024 * 3 * 8


class TestMutilate:
    """Tests for edge removal"""

    def test_remove_incoming(self):
        """Removing edges into T keeps T -> Y and X -> Y"""
        dag = template("Y")
        cut = mutilate(dag, remove_incoming={"T"})
        assert ("X", "T") not in cut.edges
        assert {("T", "Y"), ("X", "Y"), ("Y", "S")} <= cut.edges

    def test_remove_outgoing(self):
        """Removing edges out of T in a chain leaves X -> T"""
        dag = Dag([("X", "T"), ("T", "Y")])
        assert mutilate(dag, remove_outgoing={"T"}).edges == {("X", "T")}

    def test_idempotent(self):
        """Mutilating twice equals mutilating once"""
        dag = template("T", "X")
        once = mutilate(dag, remove_incoming={"T"}, remove_outgoing={"X"})
        twice = mutilate(once, remove_incoming={"T"}, remove_outgoing={"X"})
        assert once == twice

    def test_never_adds_edges_and_keeps_original(self):
        """Output edges are a subset and the input is untouched"""
        dag = template("T", "Y")
        before = set(dag.edges)
        cut = mutilate(dag, remove_incoming={"Y"}, remove_outgoing={"T"})
        assert cut.edges <= dag.edges
        assert dag.edges == before
        assert cut.nodes == dag.nodes


class TestProperCausalPaths:
    """Tests for proper causal nodes and the proper backdoor graph"""

    def test_proper_causal_nodes(self):
        """Only Y lies on T's causal path in the template"""
        assert proper_causal_nodes(template("Y")) == {"Y"}

    def test_forbidden_includes_descendants_of_causal_nodes(self):
        """S below Y is forbidden"""
        assert forbidden_nodes(template("Y")) == {"T", "Y", "S"}

    def test_mediator_path(self):
        """A mediator is a proper causal node"""
        dag = Dag([("T", "M"), ("M", "Y"), ("X", "T"), ("X", "Y")],
                  {"T": Role.TREATMENT, "Y": Role.OUTCOME})
        assert proper_causal_nodes(dag) == {"M", "Y"}
        assert ("T", "M") not in proper_backdoor_graph(dag).edges
        assert ("M", "Y") in proper_backdoor_graph(dag).edges

    def test_backdoor_graph_drops_first_causal_edge(self):
        """T -> Y goes, everything else stays"""
        dag = template("T")
        assert proper_backdoor_graph(dag).edges == dag.edges - {("T", "Y")}


class TestCheckCriterion:
    """Tests for clause-by-clause criterion evaluation"""

    def test_selection_backdoor_holds_when_s_child_of_t(self):
        """S child of T with Z={X} satisfies the selection-backdoor criterion"""
        report = check_criterion(template("T"), Criterion.SELECTION_BACKDOOR, ["X"])
        assert report.holds
        assert report.failed_clause is None
        assert "1-4" in report.note

    def test_gact1_fails_clause_c_when_s_child_of_y(self):
        """S child of Y fails GACT1 at clause (c) with witness Y - S"""
        report = check_criterion(template("Y"), Criterion.GACT1, ["X"])
        assert not report.holds
        assert report.failed_clause == "c"
        assert report.witness_path == ["Y", "S"]

    def test_gact2_holds_when_s_child_of_x(self):
        """S child of X satisfies GACT2 with Z={X}"""
        report = check_criterion(template("X"), Criterion.GACT2, ["X"])
        assert report.holds

    def test_gact1_fails_when_s_child_of_x(self):
        """Without external data the X -> S graph fails GACT1"""
        report = check_criterion(template("X"), Criterion.GACT1, ["X"])
        assert not report.holds
        assert report.failed_clause == "c"
        assert report.witness_path == ["Y", "X", "S"]

    def test_s_id_fails_when_t_causes_s(self):
        """S-id needs T outside the ancestors of S"""
        report = check_criterion(template("T"), Criterion.S_ID, ["X"])
        assert not report.holds
        assert report.failed_clause == "a"
        assert report.witness_path == ["T", "S"]

    def test_selection_backdoor_ext(self):
        """S child of X satisfies the extended selection-backdoor criterion"""
        assert check_criterion(template("X"), Criterion.SELECTION_BACKDOOR_EXT, ["X"]).holds

    def test_descendant_of_t_in_z_fails_first_clause(self):
        """Adjusting for a descendant of T fails clause 1"""
        dag = Dag(BASE_EDGES + [("T", "M"), ("Y", "S")], {**ROLES, "M": Role.COVARIATE})
        report = check_criterion(dag, Criterion.SELECTION_BACKDOOR, ["X", "M"])
        assert not report.holds
        assert report.failed_clause == "1"
        assert report.witness_path == ["T", "M"]

    def test_failed_report_has_clause(self):
        """holds=False always comes with a failed clause"""
        for parents in (("Y",), ("X", "Y"), ("T", "Y")):
            for criterion in Criterion.ALL:
                report = check_criterion(template(*parents), criterion, ["X"])
                if not report.holds:
                    assert report.failed_clause is not None

    def test_witness_paths_are_open(self):
        """Separation-clause witnesses are real edge paths of the graph"""
        report = check_criterion(template("X", "Y"), Criterion.GACT2, ["X"])
        assert not report.holds
        path = report.witness_path
        assert path[0] == "Y" and path[-1] == "S"
        skeleton = template("X", "Y").graph.to_undirected()
        assert all(skeleton.has_edge(u, v) for u, v in zip(path, path[1:]))

    def test_unknown_criterion(self):
        """Unknown criterion names raise"""
        with pytest.raises(ConfigError, match="unknown criterion"):
            check_criterion(template("Y"), "backdoor", ["X"])

    def test_z_may_not_contain_roles(self):
        """T, Y and S are not adjustable"""
        with pytest.raises(ConfigError, match="adjustment set"):
            check_criterion(template("Y"), Criterion.GACT1, ["S"])

    def test_missing_selection_node(self):
        """Criteria need a selection node"""
        dag = Dag(BASE_EDGES, {"T": Role.TREATMENT, "Y": Role.OUTCOME, "X": Role.COVARIATE})
        with pytest.raises(ConfigError, match="selection"):
            check_criterion(dag, Criterion.GACT1, ["X"])

    def test_to_dict(self):
        """Reports serialize with all fields"""
        data = check_criterion(template("Y"), Criterion.GACT1, ["X"]).to_dict()
        assert data["criterion"] == "gact1"
        assert data["holds"] is False
        assert data["failed_clause"] == "c"
        assert data["z"] == ["X"]


class TestClassifyTable1:
    """Tests for the four-node classification"""

    @pytest.mark.parametrize("name,framework,s_id", TABLE1_ROWS)
    def test_rows(self, name, framework, s_id):
        """Every row reproduces its framework and S-id verdicts"""
        result = classify_table1(load(name))
        assert result.dag_framework == framework
        assert result.s_id == s_id

    def test_selection_parents_reported(self):
        """The parents of S are listed sorted"""
        assert classify_table1(template("T", "X")).selection_parents == ("T", "X")

    def test_non_template_rejected(self):
        """Extra nodes or edges are not a four-node selection template"""
        dag = Dag(BASE_EDGES + [("Y", "S"), ("S", "W")], ROLES)
        with pytest.raises(ConfigError, match="not a four-node selection template"):
            classify_table1(dag)

    def test_missing_selection_parent_rejected(self):
        """S must hang off at least one of X, T, Y"""
        dag = Dag(BASE_EDGES, ROLES)
        with pytest.raises(ConfigError, match="not a four-node selection template"):
            classify_table1(dag)

    def test_missing_roles_rejected(self):
        """Graphs without roles are not four-node selection templates"""
        dag = Dag(BASE_EDGES + [("Y", "S")])
        with pytest.raises(ConfigError, match="not a four-node selection template"):
            classify_table1(dag)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
