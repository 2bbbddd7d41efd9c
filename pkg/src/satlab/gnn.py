"""Fixed-point graph neural network for graph-level classification.

Node states solve x_n = sum over incoming edges of h_w(l_n, l_{n,u}, x_u,
l_u), found by synchronous iteration from zero (Banach fixed point; h_w is
kept contractive). A linear variant computes messages A_{n,u} x_u + b_n
with contraction enforced by construction; the nonlinear variant is a
one-hidden-layer tanh network whose Jacobian norm is discouraged from
exceeding mu by a soft penalty. Classification reads the output node's
stable state through an affine map and a softmax. Gradients avoid
unrolling: an adjoint fixed point z = J^T z + dL/dx is solved at the
converged states (recurrent backpropagation), and the contraction penalty
is differentiated exactly through its power iteration.

Everything works on batches: a GraphBatch is the disjoint union of graphs,
and per-graph convergence freezing makes batched results identical to
running each graph alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import NODE_LABEL_DIM, VarVarGraph

LINEAR = "LINEAR"
NONLINEAR = "NONLINEAR"

CHECKPOINT_FORMAT = "satlab-gnn-1"

DEFAULT_STATE_DIM = 10
DEFAULT_MAX_ITERS = 50
DEFAULT_TOL = 1e-6
DEFAULT_MU = 0.9
DEFAULT_HIDDEN = 32
INIT_SCALE = 0.1

POWER_ITERS = 5
# Fixed base seed for power-iteration start vectors: they must depend only
# on the graph (not on batch composition or training step) so that batched
# and solo runs, and resumed runs, see identical penalty values.
POWER_SEED = 961748941

PROB_FLOOR = 1e-12
CONTRACTION_GUARD = 0.999  # estimated norm above which fixed-point grads are withheld

_PARAM_ORDER = {
    LINEAR: ("PA", "qA", "Pb", "qb", "R", "r0"),
    NONLINEAR: ("W1L", "U", "c1", "W2", "c2", "R", "r0"),
}


def _param_shapes(variant: str, s: int, label_dim: int, hidden: int) -> dict[str, tuple]:
    if variant == LINEAR:
        return {
            "PA": (s * s, label_dim),
            "qA": (s * s,),
            "Pb": (s, label_dim),
            "qb": (s,),
            "R": (2, s),
            "r0": (2,),
        }
    return {
        "W1L": (hidden, label_dim),
        "U": (hidden, s),
        "c1": (hidden,),
        "W2": (s, hidden),
        "c2": (s,),
        "R": (2, s),
        "r0": (2,),
    }


@dataclass
class GnnModel:
    """Transition + readout parameters.

    ``edge_feature_dim`` is the dense edge label width the model was built
    for; the per-edge input of h_w concatenates (l_n, l_{n,u}, l_u), so its
    label block has width edge_feature_dim + 6.
    """

    variant: str
    s: int
    mu: float
    edge_feature_dim: int
    hidden: int
    params: dict[str, np.ndarray]

    @property
    def label_dim(self) -> int:
        return self.edge_feature_dim + 2 * NODE_LABEL_DIM

    @classmethod
    def init(
        cls,
        variant: str,
        s: int,
        edge_feature_dim: int,
        seed: int,
        mu: float = DEFAULT_MU,
        hidden: int = DEFAULT_HIDDEN,
    ) -> "GnnModel":
        """Fresh model with all parameters uniform in [-0.1, 0.1]."""
        if variant not in (LINEAR, NONLINEAR):
            raise ValueError(f"unknown variant {variant!r}")
        if not 0 < mu < 1:
            raise ValueError("mu must lie in (0, 1)")
        label_dim = edge_feature_dim + 2 * NODE_LABEL_DIM
        shapes = _param_shapes(variant, s, label_dim, hidden)
        rng = np.random.default_rng(seed)
        params = {
            name: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shapes[name])
            for name in _PARAM_ORDER[variant]
        }
        return cls(
            variant=variant,
            s=s,
            mu=mu,
            edge_feature_dim=edge_feature_dim,
            hidden=hidden if variant == NONLINEAR else 0,
            params=params,
        )

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def copy(self) -> "GnnModel":
        return GnnModel(
            variant=self.variant,
            s=self.s,
            mu=self.mu,
            edge_feature_dim=self.edge_feature_dim,
            hidden=self.hidden,
            params={k: v.copy() for k, v in self.params.items()},
        )

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "variant": self.variant,
            "s": self.s,
            "mu": self.mu,
            "edge_feature_dim": self.edge_feature_dim,
            "hidden": self.hidden,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GnnModel":
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
        return cls(
            variant=doc["variant"],
            s=int(doc["s"]),
            mu=float(doc["mu"]),
            edge_feature_dim=int(doc["edge_feature_dim"]),
            hidden=int(doc["hidden"]),
            params={k: np.asarray(v, dtype=np.float64) for k, v in doc["params"].items()},
        )


@dataclass
class NodeStates:
    """Converged (or iteration-capped) states of a single graph."""

    states: np.ndarray
    iterations_used: int
    converged: bool
    residual: float


@dataclass
class BatchStates:
    """Per-graph convergence bookkeeping over a batch union."""

    states: np.ndarray
    iterations_used: np.ndarray
    converged: np.ndarray
    residual: np.ndarray


class GraphBatch:
    """Disjoint union of variable-variable graphs, pre-assembled for the GNN.

    Directed edges are duplicated from the undirected lists (one per
    direction), sorted by destination. Edge inputs (l_dst, l_edge, l_src)
    live in one sparse CSR matrix; a handful of ones per row, so density is
    a few per hundred columns at typical m_max.
    """

    def __init__(self, graphs: list[VarVarGraph]):
        if not graphs:
            raise ValueError("empty batch")
        dims = {g.edge_feature_dim for g in graphs}
        if len(dims) != 1:
            raise ValueError(f"graphs disagree on edge feature width: {sorted(dims)}")
        self.graphs = list(graphs)
        self.edge_feature_dim = dims.pop()
        self.label_dim = self.edge_feature_dim + 2 * NODE_LABEL_DIM

        counts = [g.num_nodes for g in graphs]
        self.node_offset = np.concatenate([[0], np.cumsum(counts)])
        self.num_nodes = int(self.node_offset[-1])
        self.num_graphs = len(graphs)
        self.graph_of_node = np.repeat(np.arange(self.num_graphs), counts)
        self.output_index = np.array(
            [g.output_node + self.node_offset[i] for i, g in enumerate(graphs)]
        )

        self.node_labels = np.zeros((self.num_nodes, NODE_LABEL_DIM))
        dst, src, feat_rows = [], [], []
        for gi, g in enumerate(self.graphs):
            off = int(self.node_offset[gi])
            self.node_labels[off : off + g.num_nodes] = g.node_labels()
            for e in g.edges:
                f = g.edge_feature(e)
                dst.extend((e.u + off, e.v + off))
                src.extend((e.v + off, e.u + off))
                feat_rows.extend((f, f))
        self.num_edges = len(dst)
        dst = np.asarray(dst, dtype=np.int64)
        src = np.asarray(src, dtype=np.int64)

        order = np.lexsort((src, dst))
        self.dst = dst[order]
        self.src = src[order]
        edge_feats = (
            np.stack([feat_rows[i] for i in order])
            if self.num_edges
            else np.zeros((0, self.edge_feature_dim))
        )

        # phi rows: [l_dst | edge label | l_src]
        phi = np.zeros((self.num_edges, self.label_dim))
        if self.num_edges:
            phi[:, :NODE_LABEL_DIM] = self.node_labels[self.dst]
            phi[:, NODE_LABEL_DIM : NODE_LABEL_DIM + self.edge_feature_dim] = edge_feats
            phi[:, NODE_LABEL_DIM + self.edge_feature_dim :] = self.node_labels[self.src]
        self.phi = sp.csr_matrix(phi)

        self.deg = np.bincount(self.dst, minlength=self.num_nodes).astype(np.float64)

        # segment boundaries for destination-order sums
        self._dst_present, self._dst_starts = self._segments(self.dst)
        src_order = np.argsort(self.src, kind="stable")
        self._src_order = src_order
        self._src_present, self._src_starts = self._segments(self.src[src_order])

        self.graph_nodes = [
            np.arange(self.node_offset[i], self.node_offset[i + 1])
            for i in range(self.num_graphs)
        ]

    @staticmethod
    def _segments(sorted_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if len(sorted_ids) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        change = np.flatnonzero(np.diff(sorted_ids)) + 1
        starts = np.concatenate([[0], change])
        return sorted_ids[starts], starts

    def sum_by_dst(self, per_edge: np.ndarray) -> np.ndarray:
        out = np.zeros((self.num_nodes, per_edge.shape[1]))
        if self.num_edges:
            out[self._dst_present] = np.add.reduceat(per_edge, self._dst_starts, axis=0)
        return out

    def sum_by_src(self, per_edge: np.ndarray) -> np.ndarray:
        out = np.zeros((self.num_nodes, per_edge.shape[1]))
        if self.num_edges:
            reordered = per_edge[self._src_order]
            out[self._src_present] = np.add.reduceat(reordered, self._src_starts, axis=0)
        return out

    def graph_max(self, per_node: np.ndarray) -> np.ndarray:
        """Per-graph max over nodes of a nonnegative per-node scalar."""
        out = np.zeros(self.num_graphs)
        np.maximum.at(out, self.graph_of_node, per_node)
        return out

    def graph_sum(self, per_node: np.ndarray) -> np.ndarray:
        return np.bincount(self.graph_of_node, weights=per_node, minlength=self.num_graphs)

    def power_start(self, s: int) -> np.ndarray:
        """Unit-norm start vector per graph, a function of graph size only."""
        v0 = np.zeros((self.num_nodes, s))
        for gi, g in enumerate(self.graphs):
            rng = np.random.default_rng([POWER_SEED, g.num_nodes])
            block = rng.standard_normal((g.num_nodes, s))
            norm = np.linalg.norm(block)
            v0[self.graph_nodes[gi]] = block / (norm if norm > 0 else 1.0)
        return v0


# -- transition machinery ----------------------------------------------------


class _LinearEdges:
    """Per-edge A matrices and b vectors; constant during one forward."""

    def __init__(self, model: GnnModel, batch: GraphBatch):
        p = model.params
        s = model.s
        self.araw = batch.phi @ p["PA"].T + p["qA"]  # (E, s*s)
        self.tanh_araw = np.tanh(self.araw)
        deg_dst = batch.deg[batch.dst]
        self.kappa = model.mu / (s * np.maximum(deg_dst, 1.0))  # (E,)
        self.A = (self.kappa[:, None] * self.tanh_araw).reshape(-1, s, s)
        braw = batch.phi @ p["Pb"].T + p["qb"]  # (E, s)
        self.b = braw / np.maximum(deg_dst, 1.0)[:, None]

    def messages(self, x_src: np.ndarray) -> np.ndarray:
        return np.einsum("eij,ej->ei", self.A, x_src) + self.b

    def jvp_edges(self, v_src: np.ndarray) -> np.ndarray:
        return np.einsum("eij,ej->ei", self.A, v_src)

    def vjp_edges(self, w_dst: np.ndarray) -> np.ndarray:
        return np.einsum("eij,ei->ej", self.A, w_dst)


class _NonlinearEdges:
    """Cached label part of the hidden pre-activation; tanh state set later."""

    def __init__(self, model: GnnModel, batch: GraphBatch):
        p = model.params
        self.U = p["U"]
        self.W2 = p["W2"]
        self.c2 = p["c2"]
        self.pre_label = batch.phi @ p["W1L"].T + p["c1"]  # (E, H)
        self.T: np.ndarray | None = None  # tanh(pre) at the latest states

    def messages(self, x_src: np.ndarray) -> np.ndarray:
        self.T = np.tanh(self.pre_label + x_src @ self.U.T)
        return self.T @ self.W2.T + self.c2


def _edge_cache(model: GnnModel, batch: GraphBatch):
    if model.variant == LINEAR:
        return _LinearEdges(model, batch)
    return _NonlinearEdges(model, batch)


def transition(model: GnnModel, l_n, l_edge, x_u, l_u, deg_n: int = 1) -> np.ndarray:
    """Single-edge contribution h_w(l_n, l_{n,u}, x_u, l_u).

    ``deg_n`` is the receiving node's degree, which the LINEAR variant
    folds into its contraction rescaling (mu / (s * deg_n)).
    """
    l_n = np.asarray(l_n, dtype=np.float64)
    l_edge = np.asarray(l_edge, dtype=np.float64)
    l_u = np.asarray(l_u, dtype=np.float64)
    x_u = np.asarray(x_u, dtype=np.float64)
    phi = np.concatenate([l_n, l_edge, l_u])
    if phi.shape[0] != model.label_dim:
        raise ValueError(
            f"label width {phi.shape[0]} does not match model ({model.label_dim})"
        )
    if x_u.shape != (model.s,):
        raise ValueError(f"state has shape {x_u.shape}, expected ({model.s},)")
    p = model.params
    if model.variant == LINEAR:
        a = model.mu / (model.s * max(deg_n, 1)) * np.tanh(p["PA"] @ phi + p["qA"])
        b = (p["Pb"] @ phi + p["qb"]) / max(deg_n, 1)
        return a.reshape(model.s, model.s) @ x_u + b
    t = np.tanh(p["W1L"] @ phi + p["U"] @ x_u + p["c1"])
    return p["W2"] @ t + p["c2"]


# -- forward fixed point -----------------------------------------------------


def forward_fixed_point_batch(
    model: GnnModel,
    batch: GraphBatch,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    initial_states: np.ndarray | None = None,
) -> BatchStates:
    """Synchronous iteration x <- H(x) with per-graph freezing.

    A graph's nodes stop updating the moment its own update residual
    (max-norm over its nodes) drops to ``tol``, exactly as a solo run of
    that graph would stop; remaining graphs keep iterating. Non-finite
    states abort with an error rather than propagating NaNs.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    edges = _edge_cache(model, batch)
    if initial_states is None:
        x = np.zeros((batch.num_nodes, model.s))
    else:
        x = np.array(initial_states, dtype=np.float64)
        if x.shape != (batch.num_nodes, model.s):
            raise ValueError(f"initial states have shape {x.shape}")
    active = np.ones(batch.num_graphs, dtype=bool)
    iterations = np.zeros(batch.num_graphs, dtype=np.int64)
    residual = np.full(batch.num_graphs, np.inf)
    for _ in range(max_iters):
        new_x = batch.sum_by_dst(edges.messages(x[batch.src]))
        if not np.isfinite(new_x).all():
            raise RuntimeError(
                "fixed-point iteration produced non-finite states "
                "(transition map is not a contraction)"
            )
        node_res = np.abs(new_x - x).max(axis=1)
        graph_res = batch.graph_max(node_res)
        act_nodes = active[batch.graph_of_node]
        x = np.where(act_nodes[:, None], new_x, x)
        residual[active] = graph_res[active]
        iterations[active] += 1
        active = active & (graph_res > tol)
        if not active.any():
            break
    return BatchStates(
        states=x,
        iterations_used=iterations,
        converged=residual <= tol,
        residual=residual,
    )


def forward_fixed_point(
    model: GnnModel,
    graph: VarVarGraph,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    initial_states: np.ndarray | None = None,
) -> NodeStates:
    out = forward_fixed_point_batch(
        model, GraphBatch([graph]), max_iters=max_iters, tol=tol, initial_states=initial_states
    )
    return NodeStates(
        states=out.states,
        iterations_used=int(out.iterations_used[0]),
        converged=bool(out.converged[0]),
        residual=float(out.residual[0]),
    )


# -- readout and loss --------------------------------------------------------


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def readout_batch(model: GnnModel, states: np.ndarray, batch: GraphBatch) -> np.ndarray:
    logits = states[batch.output_index] @ model.params["R"].T + model.params["r0"]
    return _softmax_rows(logits)


def readout(model: GnnModel, states: np.ndarray, graph: VarVarGraph) -> tuple[float, float]:
    """Class probabilities (p_SAT, p_UNSAT) from the output node's state."""
    logits = model.params["R"] @ states[graph.output_node] + model.params["r0"]
    p = _softmax_rows(logits[None, :])[0]
    return float(p[0]), float(p[1])


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-row -log p(true class), probabilities floored at 1e-12."""
    p_true = (probs * targets).sum(axis=1)
    return -np.log(np.maximum(p_true, PROB_FLOOR))


def loss(
    probs,
    target,
    penalty: float = 0.0,
    penalty_weight: float = 0.0,
) -> float:
    """Single-example loss: cross-entropy plus weighted contraction penalty."""
    probs = np.asarray(probs, dtype=np.float64).reshape(1, 2)
    target = np.asarray(target, dtype=np.float64).reshape(1, 2)
    return float(cross_entropy(probs, target)[0] + penalty_weight * penalty)


def contraction_penalty(sigma: np.ndarray, mu: float) -> np.ndarray:
    return np.maximum(0.0, sigma - mu) ** 2


# -- Jacobian estimate and its exact backward --------------------------------


def _japply_nonlinear(edges: _NonlinearEdges, batch: GraphBatch, v: np.ndarray) -> np.ndarray:
    d = 1.0 - edges.T * edges.T
    r = d * (v[batch.src] @ edges.U.T)
    return batch.sum_by_dst(r @ edges.W2.T)


def _japply_linear(edges: _LinearEdges, batch: GraphBatch, v: np.ndarray) -> np.ndarray:
    return batch.sum_by_dst(edges.jvp_edges(v[batch.src]))


def _jtapply(model: GnnModel, edges, batch: GraphBatch, w: np.ndarray) -> np.ndarray:
    if model.variant == LINEAR:
        return batch.sum_by_src(edges.vjp_edges(w[batch.dst]))
    d = 1.0 - edges.T * edges.T
    pd = (w[batch.dst] @ edges.W2) * d
    return batch.sum_by_src(pd @ edges.U)


def estimate_jacobian_norm(
    model: GnnModel,
    batch: GraphBatch,
    edges: _NonlinearEdges,
    n_iters: int = POWER_ITERS,
) -> tuple[np.ndarray, dict]:
    """Per-graph power-iteration estimate of the transition Jacobian's norm.

    Runs v <- J v / |J v| per graph for n_iters rounds from a fixed,
    graph-determined start vector; the estimate is the norm of the final
    application. The tape of iterates is returned for the exact backward
    pass through the whole iteration.
    """
    v = batch.power_start(model.s)
    vs = [v]
    norms = []
    for _ in range(n_iters):
        a = _japply_nonlinear(edges, batch, v)
        per_node = (a * a).sum(axis=1)
        nu = np.sqrt(batch.graph_sum(per_node))
        norms.append(nu)
        denom = np.where(nu > 0, nu, 1.0)[batch.graph_of_node][:, None]
        v = a / denom
        vs.append(v)
    sigma = norms[-1]
    return sigma, {"vs": vs, "norms": norms}


def batch_sigma(
    model: GnnModel,
    batch: GraphBatch,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Per-graph Jacobian norm estimate at the (frozen) forward states.

    Forward-only: solves the fixed point, refreshes the saturation cache at
    the returned states, and runs the power iteration. NONLINEAR only; the
    LINEAR variant contracts by construction.
    """
    if model.variant != NONLINEAR:
        raise ValueError("Jacobian norm estimation applies to the NONLINEAR variant")
    edges = _edge_cache(model, batch)
    fwd = forward_fixed_point_batch(model, batch, max_iters=max_iters, tol=tol)
    edges.messages(fwd.states[batch.src])
    sigma, _ = estimate_jacobian_norm(model, batch, edges)
    return sigma


def _japply_backward_nonlinear(
    edges: _NonlinearEdges,
    batch: GraphBatch,
    x_src: np.ndarray,
    v: np.ndarray,
    y_bar: np.ndarray,
    grads: dict[str, np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Backward of y = J v through one application.

    Accumulates parameter gradients in place; returns (v_bar, x_bar), the
    cotangents on the iterate v and on the converged states (J depends on
    the states through the tanh saturations).
    """
    t = edges.T
    d = 1.0 - t * t
    v_src = v[batch.src]
    q = v_src @ edges.U.T  # (E, H)
    r = d * q
    msg_bar = y_bar[batch.dst]  # (E, s)
    grads["W2"] += np.einsum("es,eh->sh", msg_bar, r)
    r_bar = msg_bar @ edges.W2  # (E, H)
    q_bar = d * r_bar
    d_bar = q * r_bar
    grads["U"] += np.einsum("eh,ej->hj", q_bar, v_src)
    v_bar = batch.sum_by_src(q_bar @ edges.U)
    pre_bar = d_bar * (-2.0 * t * d)  # d = 1 - tanh^2(pre)
    grads["W1L"] += (batch.phi.T @ pre_bar).T
    grads["c1"] += pre_bar.sum(axis=0)
    grads["U"] += np.einsum("eh,ej->hj", pre_bar, x_src)
    x_bar = batch.sum_by_src(pre_bar @ edges.U)
    return v_bar, x_bar


def _penalty_backward(
    model: GnnModel,
    batch: GraphBatch,
    edges: _NonlinearEdges,
    x_src: np.ndarray,
    sigma: np.ndarray,
    tape: dict,
    sigma_bar: np.ndarray,
    grads: dict[str, np.ndarray],
) -> np.ndarray:
    """Exact backward through the power iteration; returns states cotangent."""
    vs = tape["vs"]
    norms = tape["norms"]
    n_iters = len(norms)
    x_bar_total = np.zeros((batch.num_nodes, model.s))
    # sigma = |a_n| with a_n = J v_{n-1}; since vs[n] = a_n / sigma, the
    # cotangent d sigma / d a_n = a_n / sigma collapses to vs[n]
    a_bar = vs[n_iters] * sigma_bar[batch.graph_of_node][:, None]
    for k in range(n_iters, 0, -1):
        v_bar, x_bar = _japply_backward_nonlinear(
            edges, batch, x_src, vs[k - 1], a_bar, grads
        )
        x_bar_total += x_bar
        if k == 1:
            break
        nu = norms[k - 2]
        safe_nu = np.where(nu > 0, nu, 1.0)[batch.graph_of_node][:, None]
        vk = vs[k - 1]
        dot = batch.graph_sum((v_bar * vk).sum(axis=1))[batch.graph_of_node][:, None]
        a_bar = (v_bar - dot * vk) / safe_nu
    return x_bar_total


# -- full loss/gradient pass -------------------------------------------------


@dataclass
class BackwardDiagnostics:
    adjoint_iterations: int
    adjoint_converged: bool


def _adjoint_solve(
    model: GnnModel,
    edges,
    batch: GraphBatch,
    g_x: np.ndarray,
    tol: float,
    max_iters: int,
) -> tuple[np.ndarray, BackwardDiagnostics]:
    """Iterate z <- J^T z + g to the fixed point of the adjoint equation.

    When the transition map is not a contraction (the penalty has not yet
    pulled the Jacobian norm down) the Neumann series diverges; further
    iterations only amplify the leading eigendirection without adding
    information, so the loop stops once the update has grown two orders of
    magnitude past its initial size and returns the bounded partial sum
    with converged=False.
    """
    z = np.zeros_like(g_x)
    converged = False
    used = 0
    first_delta = None
    for used in range(1, max_iters + 1):
        new_z = _jtapply(model, edges, batch, z) + g_x
        if not np.isfinite(new_z).all():
            raise RuntimeError("adjoint iteration produced non-finite values")
        delta = np.abs(new_z - z).max() if new_z.size else 0.0
        z = new_z
        if delta <= tol:
            converged = True
            break
        if first_delta is None:
            first_delta = delta
        elif delta > 100.0 * first_delta:
            break
    return z, BackwardDiagnostics(adjoint_iterations=used, adjoint_converged=converged)


def loss_and_grads(
    model: GnnModel,
    batch: GraphBatch,
    targets: np.ndarray,
    penalty_weight: float = 0.0,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> dict:
    """Forward, loss, and exact parameter gradients for one batch.

    Returns sums over the batch (cross-entropy, penalty, correct counts)
    plus gradients of that summed loss, so callers can combine chunks into
    a full-batch mean by dividing by the total graph count. Predictions tie
    to UNSAT when the two probabilities are exactly equal.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (batch.num_graphs, 2):
        raise ValueError(f"targets have shape {targets.shape}")
    edges = _edge_cache(model, batch)
    fwd = forward_fixed_point_batch(model, batch, max_iters=max_iters, tol=tol)
    x = fwd.states
    if model.variant == NONLINEAR:
        # refresh tanh cache at the frozen states (freezing may leave the
        # cache one iteration ahead for already-converged graphs)
        edges.messages(x[batch.src])
    x_src = x[batch.src]

    probs = readout_batch(model, x, batch)
    ce = cross_entropy(probs, targets)
    predictions = probs[:, 0] > probs[:, 1]  # SAT iff strictly larger
    correct = int((predictions == (targets[:, 0] > 0.5)).sum())

    grads = model.zero_grads()
    out_states = x[batch.output_index]
    glogits = probs - targets  # d(sum CE)/d logits
    grads["R"] += glogits.T @ out_states
    grads["r0"] += glogits.sum(axis=0)
    g_x = np.zeros_like(x)
    g_x[batch.output_index] += glogits @ model.params["R"]

    penalty_sum = 0.0
    sigma = None
    guarded = 0
    if model.variant == NONLINEAR:
        sigma, tape = estimate_jacobian_norm(model, batch, edges)
        # Gradients that flow through the fixed point rest on the implicit
        # function theorem, which needs the per-graph map to contract. For
        # graphs whose estimated Jacobian norm has reached 1 the adjoint
        # series is not summable, so their seed into the adjoint solve is
        # withheld (the batch Jacobian is block-diagonal by graph, so the
        # healthy graphs keep exact gradients) and only the direct part of
        # the penalty gradient remains to pull them back into the
        # contractive regime.
        contractive = sigma < CONTRACTION_GUARD
        node_ok = None
        if not contractive.all():
            guarded = int((~contractive).sum())
            node_ok = contractive[batch.graph_of_node][:, None]
            g_x *= node_ok
        if penalty_weight > 0.0:
            pen = contraction_penalty(sigma, model.mu)
            penalty_sum = float(pen.sum())
            sigma_bar = penalty_weight * 2.0 * np.maximum(0.0, sigma - model.mu)
            if (sigma_bar > 0).any():
                pen_seed = _penalty_backward(
                    model, batch, edges, x_src, sigma, tape, sigma_bar, grads
                )
                if node_ok is not None:
                    pen_seed = pen_seed * node_ok
                g_x += pen_seed

    adjoint_cap = max(4 * max_iters, 200)
    z, diag = _adjoint_solve(model, edges, batch, g_x, tol=tol, max_iters=adjoint_cap)

    # parameter gradients through h_w at the fixed point: z^T dH/dtheta
    z_dst = z[batch.dst]
    p = model.params
    if model.variant == LINEAR:
        lin: _LinearEdges = edges
        deg_dst = np.maximum(batch.deg[batch.dst], 1.0)
        braw_bar = z_dst / deg_dst[:, None]
        grads["Pb"] += (batch.phi.T @ braw_bar).T
        grads["qb"] += braw_bar.sum(axis=0)
        a_bar = np.einsum("ei,ej->eij", z_dst, x_src)
        sech2 = 1.0 - lin.tanh_araw * lin.tanh_araw
        araw_bar = a_bar.reshape(batch.num_edges, -1) * (lin.kappa[:, None] * sech2)
        grads["PA"] += (batch.phi.T @ araw_bar).T
        grads["qA"] += araw_bar.sum(axis=0)
    else:
        nl: _NonlinearEdges = edges
        t = nl.T
        grads["c2"] += z_dst.sum(axis=0)
        grads["W2"] += np.einsum("es,eh->sh", z_dst, t)
        pre_bar = (z_dst @ p["W2"]) * (1.0 - t * t)
        grads["W1L"] += (batch.phi.T @ pre_bar).T
        grads["c1"] += pre_bar.sum(axis=0)
        grads["U"] += np.einsum("eh,ej->hj", pre_bar, x_src)

    return {
        "ce_sum": float(ce.sum()),
        "penalty_sum": penalty_sum,
        "loss_sum": float(ce.sum()) + penalty_weight * penalty_sum,
        "correct": correct,
        "grads": grads,
        "probs": probs,
        "sigma": sigma,
        "guarded_graphs": guarded,
        "forward": fwd,
        "backward": diag,
    }


def backward_fixed_point(
    model: GnnModel,
    graph: VarVarGraph,
    target,
    penalty_weight: float = 0.0,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> dict[str, np.ndarray]:
    """Parameter gradients of the single-graph loss (adjoint method)."""
    batch = GraphBatch([graph])
    out = loss_and_grads(
        model,
        batch,
        np.asarray(target, dtype=np.float64).reshape(1, 2),
        penalty_weight=penalty_weight,
        max_iters=max_iters,
        tol=tol,
    )
    return out["grads"]
