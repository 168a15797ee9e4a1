"""Directed measurement/communication graphs.

An edge ``(j, k)`` means that agent ``k`` receives information from agent
``j``: it measures ``y_j - y_k`` and gets ``j``'s self-estimate over the
network. Vertex ids are 1-based throughout, matching how agents are named
in scenario files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DirectedGraph:
    """Unweighted digraph on vertices ``1..n_vertices``.

    Edges are stored in canonical order: sorted by head ascending, then by
    tail ascending. Every edge-indexed quantity in the package (incidence
    rows, stacked measurements, trace columns) follows that order.
    """

    n_vertices: int
    edges: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        if int(self.n_vertices) != self.n_vertices or self.n_vertices < 1:
            raise ValueError(f"n_vertices must be a positive integer, got {self.n_vertices!r}")
        canon = []
        for e in self.edges:
            tail, head = (int(v) for v in e)
            if not (1 <= tail <= self.n_vertices and 1 <= head <= self.n_vertices):
                raise ValueError(f"edge {(tail, head)} references a vertex outside 1..{self.n_vertices}")
            if tail == head:
                raise ValueError(f"self-loop at vertex {tail}")
            canon.append((tail, head))
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate edges")
        canon.sort(key=lambda e: (e[1], e[0]))
        object.__setattr__(self, "n_vertices", int(self.n_vertices))
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def n_edges(self):
        return len(self.edges)

    def in_neighbors(self, k):
        """Sorted tails of the edges whose head is ``k``."""
        return [j for (j, h) in self.edges if h == k]

    def out_neighbors(self, j):
        return sorted(h for (t, h) in self.edges if t == j)

    def subgraph(self, vertices):
        """Induced subgraph, relabelled to ``1..len(vertices)`` in sorted order.

        Returns the subgraph and the list of original ids (index ``i`` holds the
        original id of new vertex ``i + 1``).
        """
        keep = sorted(vertices)
        relabel = {v: i + 1 for i, v in enumerate(keep)}
        sub_edges = [(relabel[t], relabel[h]) for (t, h) in self.edges if t in relabel and h in relabel]
        return DirectedGraph(len(keep), tuple(sub_edges)), keep


@dataclass(frozen=True)
class SccDecomposition:
    components: tuple[frozenset, ...]
    is_independent: tuple[bool, ...]

    def independent_components(self):
        return [c for c, ind in zip(self.components, self.is_independent) if ind]


def adjacency_matrix(g):
    """``a[k-1, j-1] = 1`` iff agent ``k`` receives from agent ``j``."""
    a = np.zeros((g.n_vertices, g.n_vertices), dtype=int)
    for j, k in g.edges:
        a[k - 1, j - 1] = 1
    return a


def incidence_matrix(g):
    """|E| x N matrix, +1 at the tail and -1 at the head of each edge."""
    e = np.zeros((g.n_edges, g.n_vertices), dtype=int)
    for i, (j, k) in enumerate(g.edges):
        e[i, j - 1] = 1
        e[i, k - 1] = -1
    return e


def degrees(g):
    """Return ``(in_degrees, out_degrees)`` as integer vectors indexed by vertex - 1."""
    a = adjacency_matrix(g)
    return a.sum(axis=1), a.sum(axis=0)


def laplacian(g):
    """In-degree Laplacian ``D_in - A``; ``-(L @ v)[k]`` is ``sum_j a_kj (v_j - v_k)``."""
    a = adjacency_matrix(g)
    return np.diag(a.sum(axis=1)) - a


def scc_decompose(g):
    """Strongly connected components via an iterative Tarjan search.

    Components come out in reverse topological order of the condensation and
    each is flagged independent when no edge enters it from outside.
    """
    succ = {v: [] for v in range(1, g.n_vertices + 1)}
    for j, k in g.edges:
        succ[j].append(k)

    index = {}
    lowlink = {}
    on_stack = set()
    stack = []
    components = []
    counter = 0

    for root in range(1, g.n_vertices + 1):
        if root in index:
            continue
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(succ[root]))]
        while work:
            v, it = work[-1]
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ[w])))
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    lowlink[parent] = min(lowlink[parent], lowlink[v])
                if lowlink[v] == index[v]:
                    comp = set()
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.add(w)
                        if w == v:
                            break
                    components.append(frozenset(comp))

    independent = []
    for comp in components:
        independent.append(not any(t not in comp and h in comp for (t, h) in g.edges))
    return SccDecomposition(tuple(components), tuple(independent))


def is_strongly_connected(g):
    return len(scc_decompose(g).components) == 1
