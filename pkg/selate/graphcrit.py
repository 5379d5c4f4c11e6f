"""
Causal DAG criteria for adjustment under selection

A Dag holds a networkx DiGraph plus a role for some nodes (treatment,
outcome, covariate, selection). On top of d-separation and edge removal the
module evaluates the selection-backdoor, selection-backdoor-ext, GACT1,
GACT2 and S-id criteria clause by clause, and classifies the six
four-node graphs in which S hangs off some subset of {X, T, Y}.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

import networkx as nx

from .errors import ConfigError, DagParseError

logger = logging.getLogger(__name__)

MAX_WITNESS_PATH = 8

_NODE = r'[A-Za-z_][A-Za-z0-9_]*'
_EDGE_RE = re.compile(rf'^({_NODE})\s*->\s*({_NODE})$')
_ROLE_RE = re.compile(rf'^role\s+({_NODE})\s*=\s*(\w+)$')


class Role:
    TREATMENT = "treatment"
    OUTCOME = "outcome"
    COVARIATE = "covariate"
    SELECTION = "selection"

    ALL = (TREATMENT, OUTCOME, COVARIATE, SELECTION)
    SINGLE = (TREATMENT, OUTCOME, SELECTION)


class Criterion:
    SELECTION_BACKDOOR = "selection_backdoor"
    SELECTION_BACKDOOR_EXT = "selection_backdoor_ext"
    GACT1 = "gact1"
    GACT2 = "gact2"
    S_ID = "s_id"

    ALL = (SELECTION_BACKDOOR, SELECTION_BACKDOOR_EXT, GACT1, GACT2, S_ID)


class Framework:
    YES = "yes"
    NO = "no"
    YES_WITH_EXTERNAL = "yes-with-external"


class Dag:
    """Immutable directed acyclic graph with node roles"""

    def __init__(self, edges: Iterable[Tuple[str, str]] = (), roles: Mapping[str, str] = None,
                 nodes: Iterable[str] = ()):
        graph = nx.DiGraph()
        graph.add_nodes_from(nodes)
        graph.add_edges_from(edges)
        roles = dict(roles or {})
        graph.add_nodes_from(roles)
        if not nx.is_directed_acyclic_graph(graph):
            cycle = nx.find_cycle(graph)
            raise ConfigError(f"graph has a cycle: {' -> '.join(u for u, _ in cycle)}")
        for role in roles.values():
            if role not in Role.ALL:
                raise ConfigError(f"unknown role '{role}'. Available: {', '.join(Role.ALL)}")
        for role in Role.SINGLE:
            holders = [n for n, r in roles.items() if r == role]
            if len(holders) > 1:
                raise ConfigError(f"more than one {role} node: {', '.join(sorted(holders))}")
        self._graph = nx.freeze(graph)
        self._roles = roles

    @property
    def graph(self) -> nx.DiGraph:
        return self._graph

    @property
    def nodes(self) -> FrozenSet[str]:
        return frozenset(self._graph.nodes)

    @property
    def edges(self) -> FrozenSet[Tuple[str, str]]:
        return frozenset(self._graph.edges)

    @property
    def roles(self) -> Dict[str, str]:
        return dict(self._roles)

    def __len__(self) -> int:
        return self._graph.number_of_nodes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges and self._roles == other._roles

    def __repr__(self) -> str:
        return f"Dag(nodes={sorted(self.nodes)}, edges={sorted(self.edges)})"

    def with_role(self, role: str) -> List[str]:
        return sorted(n for n, r in self._roles.items() if r == role)

    def _single(self, role: str, required: bool = True) -> Optional[str]:
        holders = self.with_role(role)
        if not holders:
            if required:
                raise ConfigError(f"graph has no {role} node")
            return None
        return holders[0]

    @property
    def treatment(self) -> str:
        return self._single(Role.TREATMENT)

    @property
    def outcome(self) -> str:
        return self._single(Role.OUTCOME)

    @property
    def selection(self) -> Optional[str]:
        return self._single(Role.SELECTION, required=False)

    @property
    def covariates(self) -> List[str]:
        return self.with_role(Role.COVARIATE)

    def ancestors(self, node: str) -> Set[str]:
        return set(nx.ancestors(self._graph, node))

    def descendants(self, node: str) -> Set[str]:
        return set(nx.descendants(self._graph, node))


@dataclass
class CriterionReport:
    criterion: str
    holds: bool
    failed_clause: Optional[str] = None
    witness_path: Optional[List[str]] = None
    z: List[str] = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "holds": self.holds,
            "failed_clause": self.failed_clause,
            "witness_path": self.witness_path,
            "z": self.z,
            "note": self.note,
        }


def parse_dag(text: str) -> Dag:
    """
    Parse the edge-list format:

        # comment
        X -> T
        role T = treatment

    Raises:
        DagParseError: On unknown tokens, duplicate roles or a cycle, with
            the offending line number
    """
    graph = nx.DiGraph()
    roles: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue

        edge = _EDGE_RE.match(line)
        if edge:
            source, target = edge.groups()
            if source == target or (target in graph and source in graph and nx.has_path(graph, target, source)):
                raise DagParseError(f"edge {source} -> {target} closes a cycle", line=number)
            graph.add_edge(source, target)
            continue

        role = _ROLE_RE.match(line)
        if role:
            node, kind = role.groups()
            kind = kind.lower()
            if kind not in Role.ALL:
                raise DagParseError(f"unknown role '{kind}'", line=number)
            if node in roles:
                raise DagParseError(f"duplicate role for {node}", line=number)
            if kind in Role.SINGLE and kind in roles.values():
                raise DagParseError(f"duplicate {kind} role", line=number)
            roles[node] = kind
            graph.add_node(node)
            continue

        raise DagParseError(f"unknown token '{line}'", line=number)

    return Dag(graph.edges, roles, graph.nodes)


def _check_nodes(dag: Dag, *groups: Iterable[str]) -> None:
    for group in groups:
        for node in group:
            if node not in dag.graph:
                raise ConfigError(f"unknown node '{node}'")


def _is_d_separator(graph: nx.DiGraph, a: Set[str], b: Set[str], z: Set[str]) -> bool:
    if hasattr(nx, "is_d_separator"):
        return nx.is_d_separator(graph, a, b, z)
    return nx.d_separated(graph, a, b, z)


def d_separated(dag: Dag, a: Iterable[str], b: Iterable[str], z: Iterable[str] = ()) -> bool:
    """
    True iff every path between A and B is blocked given Z.

    Raises:
        ConfigError: On unknown nodes or overlapping sets
    """
    a, b, z = set(a), set(b), set(z)
    _check_nodes(dag, a, b, z)
    if a & b or a & z or b & z:
        raise ConfigError("d-separation sets must be disjoint")
    if not a or not b:
        return True
    return _is_d_separator(nx.DiGraph(dag.graph), a, b, z)


def mutilate(dag: Dag, remove_incoming: Iterable[str] = (), remove_outgoing: Iterable[str] = ()) -> Dag:
    """Copy of the graph without edges into remove_incoming and out of remove_outgoing"""
    incoming, outgoing = set(remove_incoming), set(remove_outgoing)
    _check_nodes(dag, incoming, outgoing)
    kept = [(u, v) for u, v in dag.edges if v not in incoming and u not in outgoing]
    return Dag(kept, dag.roles, dag.nodes)


def _open_path(dag: Dag, source: str, target: str, z: Set[str]) -> Optional[List[str]]:
    """First d-connecting path from source to target given z, if any"""
    graph = dag.graph
    skeleton = graph.to_undirected(as_view=True)
    reach_z = set(z)
    for node in z:
        reach_z |= dag.ancestors(node)
    paths = sorted(nx.all_simple_paths(skeleton, source, target, cutoff=MAX_WITNESS_PATH),
                   key=lambda p: (len(p), p))
    for path in paths:
        blocked = False
        for prev, node, nxt in zip(path, path[1:], path[2:]):
            collider = graph.has_edge(prev, node) and graph.has_edge(nxt, node)
            if collider and node not in reach_z:
                blocked = True
            elif not collider and node in z:
                blocked = True
            if blocked:
                break
        if not blocked:
            return list(path)
    return None


def _separation_clause(dag: Dag, a: str, b: str, z: Set[str]) -> Tuple[bool, Optional[List[str]]]:
    if a in z or b in z:
        return True, None
    if d_separated(dag, {a}, {b}, z):
        return True, None
    return False, _open_path(dag, a, b, z)


def proper_causal_nodes(dag: Dag) -> Set[str]:
    """Nodes other than T on a directed path from T to Y that does not revisit T"""
    t, y = dag.treatment, dag.outcome
    cut = mutilate(dag, remove_incoming={t})
    return (cut.descendants(t) - {t}) & (cut.ancestors(y) | {y})


def forbidden_nodes(dag: Dag) -> Set[str]:
    """Proper-causal-path nodes and their descendants once edges into T are cut"""
    t = dag.treatment
    cut = mutilate(dag, remove_incoming={t})
    forbidden = set()
    for node in proper_causal_nodes(dag):
        forbidden |= {node} | cut.descendants(node)
    return forbidden | {t}


def proper_backdoor_graph(dag: Dag) -> Dag:
    """Drop the first edge T -> W of every proper causal path"""
    t = dag.treatment
    on_path = proper_causal_nodes(dag)
    kept = [(u, v) for u, v in dag.edges if not (u == t and v in on_path)]
    return Dag(kept, dag.roles, dag.nodes)


def _forbidden_clause(dag: Dag, z: Set[str], descendants_only: bool) -> Tuple[bool, Optional[List[str]]]:
    t = dag.treatment
    forbidden = (dag.descendants(t) | {t}) if descendants_only else forbidden_nodes(dag)
    for node in sorted(z & forbidden):
        path = nx.shortest_path(dag.graph, t, node) if node != t else [t]
        return False, path
    return True, None


def _require_criterion_roles(dag: Dag, z: Set[str]) -> Tuple[str, str, str]:
    t, y, s = dag.treatment, dag.outcome, dag.selection
    if s is None:
        raise ConfigError("graph has no selection node")
    _check_nodes(dag, z)
    if z & {t, y, s}:
        raise ConfigError("adjustment set may not contain T, Y or S")
    return t, y, s


def check_criterion(dag: Dag, criterion: str, z: Iterable[str] = ()) -> CriterionReport:
    """
    Evaluate one criterion for adjustment set Z, clause by clause.

    Clauses, in evaluation order:

        selection_backdoor      1 Z has no descendant of T
                                2 T _||_ Y | Z u {S} in the proper backdoor graph
                                3 Y _||_ S | T with edges into T removed
                                4 if T is an ancestor of S: T _||_ Y | Z with edges out of T removed
        selection_backdoor_ext  1, 2 as above; 3 Y _||_ S | {T} u Z
        gact1                   a Z avoids proper-causal-path descendants
                                b T _||_ Y | Z u {S} in the proper backdoor graph
                                c Y _||_ S | T with edges into T removed
                                d as selection_backdoor 4
        gact2                   a as gact1; b T _||_ Y | Z in the proper backdoor graph
                                c Y _||_ S | {T} u Z
        s_id                    a T is not an ancestor of S; b Y _||_ S | {T} u Z

    Raises:
        ConfigError: On missing roles or an unknown criterion
    """
    if criterion not in Criterion.ALL:
        raise ConfigError(f"unknown criterion '{criterion}'. Available: {', '.join(Criterion.ALL)}")
    z = set(z)
    t, y, s = _require_criterion_roles(dag, z)
    backdoor = proper_backdoor_graph(dag)
    no_in_t = mutilate(dag, remove_incoming={t})
    no_out_t = mutilate(dag, remove_outgoing={t})
    t_causes_s = s in dag.descendants(t)

    clauses = []
    note = ""
    if criterion in (Criterion.SELECTION_BACKDOOR, Criterion.SELECTION_BACKDOOR_EXT):
        note = "clauses numbered 1-4 as in the selection-backdoor statement, not a-d"
        clauses.append(("1", lambda: _forbidden_clause(dag, z, descendants_only=True)))
        clauses.append(("2", lambda: _separation_clause(backdoor, t, y, z | {s})))
        if criterion == Criterion.SELECTION_BACKDOOR:
            clauses.append(("3", lambda: _separation_clause(no_in_t, y, s, {t})))
            if t_causes_s:
                clauses.append(("4", lambda: _separation_clause(no_out_t, t, y, z)))
        else:
            clauses.append(("3", lambda: _separation_clause(dag, y, s, z | {t})))
    elif criterion == Criterion.GACT1:
        clauses.append(("a", lambda: _forbidden_clause(dag, z, descendants_only=False)))
        clauses.append(("b", lambda: _separation_clause(backdoor, t, y, z | {s})))
        clauses.append(("c", lambda: _separation_clause(no_in_t, y, s, {t})))
        if t_causes_s:
            clauses.append(("d", lambda: _separation_clause(no_out_t, t, y, z)))
    elif criterion == Criterion.GACT2:
        clauses.append(("a", lambda: _forbidden_clause(dag, z, descendants_only=False)))
        clauses.append(("b", lambda: _separation_clause(backdoor, t, y, z)))
        clauses.append(("c", lambda: _separation_clause(dag, y, s, z | {t})))
    else:
        clauses.append(("a", lambda: (not t_causes_s,
                                      nx.shortest_path(dag.graph, t, s) if t_causes_s else None)))
        clauses.append(("b", lambda: _separation_clause(dag, y, s, z | {t})))

    for clause, evaluate in clauses:
        ok, path = evaluate()
        if not ok:
            logger.debug("%s fails clause %s (witness %s)", criterion, clause, path)
            return CriterionReport(criterion, False, failed_clause=clause, witness_path=path,
                                   z=sorted(z), note=note)
    return CriterionReport(criterion, True, z=sorted(z), note=note)


@dataclass(frozen=True)
class Table1Class:
    dag_framework: str
    s_id: str
    selection_parents: Tuple[str, ...] = ()


def _template_covariate(dag: Dag) -> str:
    try:
        t, y, s = dag.treatment, dag.outcome, dag.selection
    except ConfigError as exc:
        raise ConfigError(f"not a four-node selection template: {exc}") from exc
    covariates = dag.covariates
    if s is None or len(covariates) != 1 or len(dag) != 4:
        raise ConfigError("not a four-node selection template: need exactly X, T, Y and S")
    x = covariates[0]
    base = {(x, t), (x, y), (t, y)}
    extra = dag.edges - base
    if not base <= dag.edges or any(v != s for _, v in extra) or not extra:
        raise ConfigError("not a four-node selection template: edges must be X->T, X->Y, T->Y plus edges into S")
    return x


def classify_table1(dag: Dag) -> Table1Class:
    """
    Classify a four-node X/T/Y/S graph.

    dag_framework is 'yes' when GACT1 holds for Z={X}, 'yes-with-external'
    when only GACT2 (external unbiased X) holds, else 'no'. s_id follows the
    S-id criterion with Z={X}.

    Raises:
        ConfigError: If the graph is not of the four-node template
    """
    x = _template_covariate(dag)
    z = {x}
    if check_criterion(dag, Criterion.GACT1, z).holds:
        framework = Framework.YES
    elif check_criterion(dag, Criterion.GACT2, z).holds:
        framework = Framework.YES_WITH_EXTERNAL
    else:
        framework = Framework.NO
    s_id = Framework.YES if check_criterion(dag, Criterion.S_ID, z).holds else Framework.NO
    parents = tuple(sorted(dag.graph.predecessors(dag.selection)))
    return Table1Class(dag_framework=framework, s_id=s_id, selection_parents=parents)
