"""Variable-variable graph encoding of CNF formulas.

Each variable contributes two literal nodes (positive and negative); a
single output node aggregates the graph for classification. Edges:

- CLAUSE_COOCCURRENCE between literal nodes whose literals share >= 1
  clause, labeled by the indicator vector over clause slots (entry i = 1
  iff both occur in clause i);
- SPECIAL_VARIABLE_LINK between the two literal nodes of each variable;
- OUTPUT_LINK from the output node to every literal node.

Labels exposed to the network are dense: m_max clause indicators (or a
single shared-clause count under ``compress_edge_labels``) followed by a
3-slot edge-kind one-hot. Node labels are a 3-slot one-hot over
{positive literal, negative literal, output}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

POSITIVE_LITERAL = "POSITIVE_LITERAL"
NEGATIVE_LITERAL = "NEGATIVE_LITERAL"
OUTPUT = "OUTPUT"

CLAUSE_COOCCURRENCE = "CLAUSE_COOCCURRENCE"
SPECIAL_VARIABLE_LINK = "SPECIAL_VARIABLE_LINK"
OUTPUT_LINK = "OUTPUT_LINK"

NODE_LABEL_DIM = 3
_NODE_HOT = {POSITIVE_LITERAL: 0, NEGATIVE_LITERAL: 1, OUTPUT: 2}
_EDGE_HOT = {CLAUSE_COOCCURRENCE: 0, SPECIAL_VARIABLE_LINK: 1, OUTPUT_LINK: 2}


@dataclass(frozen=True)
class GraphNode:
    id: int
    kind: str
    var_index: int | None  # 1-based; None iff kind == OUTPUT

    def label(self) -> np.ndarray:
        hot = np.zeros(NODE_LABEL_DIM)
        hot[_NODE_HOT[self.kind]] = 1.0
        return hot


@dataclass(frozen=True)
class GraphEdge:
    """Undirected edge, stored once with u < v; ``ones`` lists the clause
    slots set to 1 (empty for non-co-occurrence kinds)."""

    u: int
    v: int
    kind: str
    ones: tuple[int, ...] = ()


@dataclass(frozen=True)
class VarVarGraph:
    num_vars: int
    m_max: int
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    output_node: int
    compress_edge_labels: bool = False

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def edge_label_dim(self) -> int:
        """Clause-indicator part of the label (the kind one-hot is appended after)."""
        return 1 if self.compress_edge_labels else self.m_max

    @property
    def edge_feature_dim(self) -> int:
        return self.edge_label_dim + len(_EDGE_HOT)

    def edge_feature(self, edge: GraphEdge) -> np.ndarray:
        feat = np.zeros(self.edge_feature_dim)
        if self.compress_edge_labels:
            feat[0] = float(len(edge.ones))
        else:
            for i in edge.ones:
                feat[i] = 1.0
        feat[self.edge_label_dim + _EDGE_HOT[edge.kind]] = 1.0
        return feat

    def node_labels(self) -> np.ndarray:
        return np.stack([node.label() for node in self.nodes])


def positive_node(var: int) -> int:
    return var - 1


def negative_node(var: int, num_vars: int) -> int:
    return num_vars + var - 1


def encode_var_var(formula, m_max: int, compress_edge_labels: bool = False) -> VarVarGraph:
    """Build the variable-variable graph of a formula.

    Node ids: positive literals of variables 1..n occupy 0..n-1, negative
    literals n..2n-1, the output node is 2n. Co-occurrence edges are sorted
    by endpoint pair, then the per-variable special links, then the output
    links; the fixed order keeps downstream computations reproducible.
    """
    n = formula.num_vars
    if formula.num_clauses > m_max:
        raise ValueError(
            f"formula has {formula.num_clauses} clauses, exceeding m_max={m_max}"
        )
    nodes = (
        [GraphNode(positive_node(v), POSITIVE_LITERAL, v) for v in range(1, n + 1)]
        + [GraphNode(negative_node(v, n), NEGATIVE_LITERAL, v) for v in range(1, n + 1)]
        + [GraphNode(2 * n, OUTPUT, None)]
    )

    cooc: dict[tuple[int, int], list[int]] = {}
    for ci, clause in enumerate(formula.clauses):
        ids = sorted(
            {positive_node(lit) if lit > 0 else negative_node(-lit, n) for lit in clause}
        )
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                cooc.setdefault((ids[a], ids[b]), []).append(ci)

    edges = [
        GraphEdge(u, v, CLAUSE_COOCCURRENCE, tuple(sorted(set(clauses))))
        for (u, v), clauses in sorted(cooc.items())
    ]
    edges += [
        GraphEdge(positive_node(v), negative_node(v, n), SPECIAL_VARIABLE_LINK)
        for v in range(1, n + 1)
    ]
    edges += [GraphEdge(i, 2 * n, OUTPUT_LINK) for i in range(2 * n)]
    return VarVarGraph(
        num_vars=n,
        m_max=m_max,
        nodes=tuple(nodes),
        edges=tuple(edges),
        output_node=2 * n,
        compress_edge_labels=compress_edge_labels,
    )


def graph_stats(graph: VarVarGraph) -> dict:
    """Node/edge counts plus degree histograms.

    ``degree_histogram`` covers all nodes and edges; ``literal_degree_histogram``
    restricts to literal nodes and the edges among them (no output links),
    which is the view in which co-occurrence structure is visible.
    """
    degree = [0] * graph.num_nodes
    literal_degree = [0] * graph.num_nodes
    for e in graph.edges:
        degree[e.u] += 1
        degree[e.v] += 1
        if e.kind != OUTPUT_LINK:
            literal_degree[e.u] += 1
            literal_degree[e.v] += 1
    hist: dict[int, int] = {}
    for d in degree:
        hist[d] = hist.get(d, 0) + 1
    lit_hist: dict[int, int] = {}
    for node in graph.nodes:
        if node.kind != OUTPUT:
            d = literal_degree[node.id]
            lit_hist[d] = lit_hist.get(d, 0) + 1
    return {
        "num_nodes": graph.num_nodes,
        "num_edges": len(graph.edges),
        "degree_histogram": dict(sorted(hist.items())),
        "literal_degree_histogram": dict(sorted(lit_hist.items())),
    }


def dump_graph_json(graph: VarVarGraph) -> str:
    doc = {
        "nodes": [
            {"id": nd.id, "kind": nd.kind, "var": nd.var_index} for nd in graph.nodes
        ],
        "edges": [
            {"u": e.u, "v": e.v, "kind": e.kind, "ones": list(e.ones)}
            for e in graph.edges
        ],
        "output_node": graph.output_node,
        "m": graph.m_max,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_graph_json(text: str, compress_edge_labels: bool = False) -> VarVarGraph:
    doc = json.loads(text)
    nodes = tuple(
        GraphNode(int(nd["id"]), str(nd["kind"]), nd["var"]) for nd in doc["nodes"]
    )
    edges = tuple(
        GraphEdge(int(e["u"]), int(e["v"]), str(e["kind"]), tuple(int(i) for i in e["ones"]))
        for e in doc["edges"]
    )
    num_vars = (len(nodes) - 1) // 2
    return VarVarGraph(
        num_vars=num_vars,
        m_max=int(doc["m"]),
        nodes=nodes,
        edges=edges,
        output_node=int(doc["output_node"]),
        compress_edge_labels=compress_edge_labels,
    )
