"""Core graph containers, random generation, perturbation and isomorphism.

Graphs are undirected and simple throughout: the adjacency matrix is a
symmetric boolean array with a zero diagonal. Instances are frozen after
construction (arrays are marked read-only) so they can be shared freely
across worker threads; every mutation-like operation returns a new Graph.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

PROVENANCES = ("train", "test", "generated", "shadow_member", "shadow_nonmember")

#: Node labels defaulted from degrees are clipped to this many classes.
MAX_DEGREE_LABEL = 31

#: Exact isomorphism search is only attempted up to this node count.
ISOMORPHISM_NODE_LIMIT = 30


class UnsupportedSizeError(ValueError):
    """Raised when an exact algorithm is asked to run beyond its size bound."""


def seeded_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """Deterministic generator derived from a master seed and a key path.

    String keys are hashed so that independent call sites can carve out
    non-overlapping streams; the same (seed, keys) always yields the same
    stream regardless of thread or process scheduling.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            digest = hashlib.sha256(key.encode("utf-8")).digest()
            entropy.append(int.from_bytes(digest[:8], "big"))
        else:
            entropy.append(int(key) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with optional node features and labels."""

    id: str
    adjacency: np.ndarray
    features: np.ndarray | None = None
    node_labels: np.ndarray | None = None
    graph_label: int | None = None

    def __post_init__(self) -> None:
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] < 1:
            raise ValueError("graph must have at least one node")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if adj.diagonal().any():
            raise ValueError("self-loops are not allowed")
        object.__setattr__(self, "adjacency", _freeze(adj.copy()))
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim != 2 or feats.shape[0] != adj.shape[0]:
                raise ValueError(
                    f"features must have {adj.shape[0]} rows, got shape {feats.shape}"
                )
            object.__setattr__(self, "features", _freeze(feats.copy()))
        if self.node_labels is not None:
            labels = np.asarray(self.node_labels, dtype=np.int64)
            if labels.shape != (adj.shape[0],):
                raise ValueError("node_labels must be a length-n vector")
            object.__setattr__(self, "node_labels", _freeze(labels.copy()))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(self.adjacency)) // 2

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(np.int64)

    def edges(self) -> np.ndarray:
        """Edges as a (m, 2) array with u < v, sorted lexicographically."""
        u, v = np.nonzero(np.triu(self.adjacency, k=1))
        return np.column_stack([u, v]).astype(np.int64)

    def same_structure(self, other: "Graph") -> bool:
        """Index-for-index adjacency equality (not isomorphism)."""
        return self.n == other.n and np.array_equal(self.adjacency, other.adjacency)


@dataclass(frozen=True)
class GraphSet:
    """Ordered collection of graphs with a provenance tag."""

    graphs: tuple[Graph, ...]
    provenance: str = "generated"

    def __post_init__(self) -> None:
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if self.provenance not in PROVENANCES:
            raise ValueError(
                f"provenance must be one of {PROVENANCES}, got {self.provenance!r}"
            )
        ids = [g.id for g in self.graphs]
        if len(set(ids)) != len(ids):
            raise ValueError("graph ids must be unique within a set")

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self) -> Iterator[Graph]:
        return iter(self.graphs)

    def __getitem__(self, i: int) -> Graph:
        return self.graphs[i]

    def with_provenance(self, provenance: str) -> "GraphSet":
        return GraphSet(self.graphs, provenance)


def graph_from_edges(
    graph_id: str,
    n: int,
    edges: Sequence[tuple[int, int]],
    features: np.ndarray | None = None,
    node_labels: np.ndarray | None = None,
    graph_label: int | None = None,
) -> Graph:
    """Build a graph from an edge list; symmetric duplicates are merged."""
    if n < 1:
        raise ValueError("n must be at least 1")
    adj = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise ValueError(f"self-loop ({u}, {v}) is not allowed")
        adj[u, v] = adj[v, u] = True
    return Graph(graph_id, adj, features, node_labels, graph_label)


def erdos_renyi(n: int, density: float, seed: int, graph_id: str | None = None) -> Graph:
    """Erdos-Renyi G(n, p): each unordered pair is an edge with prob `density`."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    rng = seeded_rng(seed, "erdos-renyi")
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < density
    adj = np.zeros((n, n), dtype=bool)
    adj[iu[mask], ju[mask]] = True
    adj |= adj.T
    return Graph(graph_id or f"er-{n}-{seed}", adj)


def perturb_flip(g: Graph, p: float, seed: int, graph_id: str | None = None) -> Graph:
    """Flip each off-diagonal unordered pair independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"flip probability must lie in [0, 1], got {p}")
    rng = seeded_rng(seed, "perturb-flip")
    n = g.n
    iu, ju = np.triu_indices(n, k=1)
    flips = rng.random(iu.size) < p
    adj = np.array(g.adjacency, dtype=bool)
    adj[iu[flips], ju[flips]] ^= True
    adj[ju[flips], iu[flips]] = adj[iu[flips], ju[flips]]
    return Graph(
        graph_id or g.id,
        adj,
        features=g.features,
        node_labels=g.node_labels,
        graph_label=g.graph_label,
    )


def default_features(g: Graph) -> np.ndarray:
    """Feature matrix for a graph, defaulting to the n x n identity."""
    if g.features is not None:
        return g.features
    return np.eye(g.n, dtype=np.float64)


def default_labels(g: Graph) -> np.ndarray:
    """Node labels, defaulting to degree clipped to [0, 31] as class index."""
    if g.node_labels is not None:
        return g.node_labels
    return np.clip(g.degrees(), 0, MAX_DEGREE_LABEL)


def _refine_classes(a1: np.ndarray, a2: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Iterative neighbor-class refinement; None when the graphs distinguish."""
    n = a1.shape[0]
    c1 = np.zeros(n, dtype=np.int64)
    c2 = np.zeros(n, dtype=np.int64)
    for _ in range(n):
        sig1 = [
            (c1[u], tuple(sorted(c1[a1[u]].tolist()))) for u in range(n)
        ]
        sig2 = [
            (c2[u], tuple(sorted(c2[a2[u]].tolist()))) for u in range(n)
        ]
        table = {s: i for i, s in enumerate(sorted(set(sig1)))}
        if sorted(set(sig1)) != sorted(set(sig2)):
            return None
        if sorted(sig1) != sorted(sig2):
            return None
        new1 = np.array([table[s] for s in sig1])
        new2 = np.array([table[s] for s in sig2])
        if np.array_equal(new1, c1) and np.array_equal(new2, c2):
            break
        c1, c2 = new1, new2
    return c1, c2


def is_isomorphic(g1: Graph, g2: Graph) -> bool:
    """Exact isomorphism test by backtracking search (n <= 30)."""
    if g1.n > ISOMORPHISM_NODE_LIMIT or g2.n > ISOMORPHISM_NODE_LIMIT:
        raise UnsupportedSizeError(
            f"isomorphism search supports at most {ISOMORPHISM_NODE_LIMIT} nodes"
        )
    if g1.n != g2.n or g1.num_edges != g2.num_edges:
        return False
    a1 = np.asarray(g1.adjacency)
    a2 = np.asarray(g2.adjacency)
    if sorted(g1.degrees().tolist()) != sorted(g2.degrees().tolist()):
        return False
    refined = _refine_classes(a1, a2)
    if refined is None:
        return False
    c1, c2 = refined
    n = g1.n
    # Match highest-degree / most-constrained nodes first.
    order = sorted(range(n), key=lambda u: (-int(a1[u].sum()), u))
    candidates = [np.nonzero(c2 == c1[u])[0] for u in range(n)]
    mapping = np.full(n, -1, dtype=np.int64)
    used = np.zeros(n, dtype=bool)

    def backtrack(pos: int) -> bool:
        if pos == n:
            return True
        u = order[pos]
        placed = [w for w in order[:pos]]
        for v in candidates[u]:
            if used[v]:
                continue
            ok = True
            for w in placed:
                if a1[u, w] != a2[v, mapping[w]]:
                    ok = False
                    break
            if not ok:
                continue
            mapping[u] = v
            used[v] = True
            if backtrack(pos + 1):
                return True
            mapping[u] = -1
            used[v] = False
        return False

    return backtrack(0)
