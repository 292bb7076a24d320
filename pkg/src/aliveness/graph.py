"""Undirected simple graphs and the node-level measures used as network features.

Conventions for disconnected graphs:

* betweenness counts unordered pairs ``{s, t}`` with ``v`` not an endpoint;
  pairs in different components contribute nothing.
* closeness and eccentricity only look at ``v``'s own component; an isolated
  node gets 0 for both.
* ``MinCut(u, v)`` is 0 when ``u`` and ``v`` are in different components, and
  the averaged min cut divides by the total node count ``n``.
"""

from __future__ import annotations

import csv
import random
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Iterable, Iterator

Node = Hashable

METRIC_FIELDS = (
    "degree",
    "betweenness",
    "closeness",
    "coreness",
    "eccentricity",
    "is_articulation",
    "avg_min_cut",
)

DEFAULT_SAMPLE_THRESHOLD = 2000


class Graph:
    """Immutable undirected simple graph.

    Self-loops are dropped and repeated edges collapse into one.
    """

    __slots__ = ("_adj", "_edges")

    def __init__(self, edges: Iterable[tuple[Node, Node]] = (), nodes: Iterable[Node] = ()):
        adj: dict[Node, set[Node]] = {}
        for v in nodes:
            adj.setdefault(v, set())
        for u, v in edges:
            if u == v:
                continue
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        self._adj = {v: frozenset(nb) for v, nb in adj.items()}
        self._edges = frozenset(
            frozenset((u, v)) for u, nb in self._adj.items() for v in nb
        )

    @property
    def nodes(self) -> frozenset:
        return frozenset(self._adj)

    @property
    def edges(self) -> frozenset:
        """Set of edges, each a two-element frozenset."""
        return self._edges

    def neighbors(self, v: Node) -> frozenset:
        try:
            return self._adj[v]
        except KeyError:
            raise KeyError(f"unknown node {v!r}") from None

    def __contains__(self, v: object) -> bool:
        return v in self._adj

    def __iter__(self) -> Iterator[Node]:
        return iter(self._adj)

    def __len__(self) -> int:
        return len(self._adj)

    def number_of_edges(self) -> int:
        return len(self._edges)

    def relabel(self, mapping: dict) -> "Graph":
        return Graph(
            ((mapping[u], mapping[v]) for u, v in self.edge_pairs()),
            nodes=(mapping[v] for v in self._adj),
        )

    def edge_pairs(self) -> list[tuple[Node, Node]]:
        """Edges as ``(u, v)`` tuples in a deterministic order."""
        pairs = [tuple(sorted(e, key=_sort_key)) for e in self._edges]
        pairs.sort(key=lambda p: (_sort_key(p[0]), _sort_key(p[1])))
        return pairs

    def sorted_nodes(self) -> list[Node]:
        return sorted(self._adj, key=_sort_key)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._adj == other._adj

    def __hash__(self) -> int:
        return hash((frozenset(self._adj), self._edges))

    def __repr__(self) -> str:
        return f"Graph(nodes={len(self)}, edges={self.number_of_edges()})"


def _sort_key(v: Node):
    # Mixed id types (ints from tests, strings from files) must still sort.
    return (type(v).__name__, v)


def _check(g: Graph, v: Node) -> None:
    if v not in g:
        raise KeyError(f"unknown node {v!r}")


# --------------------------------------------------------------------------
# Shortest-path measures
# --------------------------------------------------------------------------

def _bfs_distances(g: Graph, source: Node) -> dict[Node, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for w in g.neighbors(u):
            if w not in dist:
                dist[w] = du
                queue.append(w)
    return dist


def degree(g: Graph, v: Node) -> int:
    return len(g.neighbors(v))


def closeness(g: Graph, v: Node) -> float:
    _check(g, v)
    total = sum(_bfs_distances(g, v).values())
    return 1.0 / total if total else 0.0


def eccentricity(g: Graph, v: Node) -> int:
    _check(g, v)
    return max(_bfs_distances(g, v).values())


def _brandes_source(g: Graph, s: Node, acc: dict[Node, float]) -> dict[Node, int]:
    """One single-source pass of Brandes' accumulation. Returns BFS distances."""
    order = []
    preds: dict[Node, list[Node]] = {s: []}
    sigma = {s: 1}
    dist = {s: 0}
    queue = deque([s])
    while queue:
        v = queue.popleft()
        order.append(v)
        dv = dist[v] + 1
        for w in g.neighbors(v):
            if w not in dist:
                dist[w] = dv
                sigma[w] = 0
                preds[w] = []
                queue.append(w)
            if dist[w] == dv:
                sigma[w] += sigma[v]
                preds[w].append(v)
    delta = dict.fromkeys(order, 0.0)
    for w in reversed(order):
        coeff = (1.0 + delta[w]) / sigma[w]
        for v in preds[w]:
            delta[v] += sigma[v] * coeff
        if w != s:
            acc[w] += delta[w]
    return dist


def betweenness_all(g: Graph) -> dict[Node, float]:
    """Unordered-pair shortest-path betweenness of every node."""
    acc = dict.fromkeys(g.sorted_nodes(), 0.0)
    for s in acc:
        _brandes_source(g, s, acc)
    # every unordered pair was accumulated once from each endpoint
    return {v: b / 2.0 for v, b in acc.items()}


# --------------------------------------------------------------------------
# Cores and cut vertices
# --------------------------------------------------------------------------

def coreness_all(g: Graph) -> dict[Node, int]:
    """Core number of every node by bucket-ordered minimum-degree peeling."""
    nodes = g.sorted_nodes()
    deg = {v: len(g.neighbors(v)) for v in nodes}
    if not nodes:
        return {}
    max_deg = max(deg.values())
    buckets: list[list[Node]] = [[] for _ in range(max_deg + 1)]
    for v in nodes:
        buckets[deg[v]].append(v)
    core: dict[Node, int] = {}
    k = 0
    removed = set()
    for d in range(max_deg + 1):
        # degrees only ever drop to >= current d, so buckets below d stay empty
        while buckets[d]:
            v = buckets[d].pop()
            if v in removed or deg[v] != d:
                continue
            k = max(k, d)
            core[v] = k
            removed.add(v)
            for w in g.neighbors(v):
                if w not in removed and deg[w] > d:
                    deg[w] -= 1
                    buckets[deg[w]].append(w)
    return core


def articulation_points(g: Graph) -> set[Node]:
    """Cut vertices via iterative DFS low-link."""
    disc: dict[Node, int] = {}
    low: dict[Node, int] = {}
    cuts: set[Node] = set()
    counter = 0
    for root in g.sorted_nodes():
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        root_children = 0
        stack = [(root, None, iter(g.neighbors(root)))]
        while stack:
            v, parent, it = stack[-1]
            advanced = False
            for w in it:
                if w not in disc:
                    disc[w] = low[w] = counter
                    counter += 1
                    if v == root:
                        root_children += 1
                    stack.append((w, v, iter(g.neighbors(w))))
                    advanced = True
                    break
                if w != parent:
                    low[v] = min(low[v], disc[w])
            if advanced:
                continue
            stack.pop()
            if parent is not None:
                low[parent] = min(low[parent], low[v])
                if parent != root and low[v] >= disc[parent]:
                    cuts.add(parent)
        if root_children > 1:
            cuts.add(root)
    return cuts


# --------------------------------------------------------------------------
# Minimum edge cuts
# --------------------------------------------------------------------------

class _UnitFlow:
    """Unit-capacity max-flow on an undirected graph (each edge is two arcs of capacity 1)."""

    def __init__(self, g: Graph, nodes: list[Node]):
        self.index = {v: i for i, v in enumerate(nodes)}
        self.adj = [[self.index[w] for w in g.neighbors(v) if w in self.index] for v in nodes]

    def max_flow(self, s: int, t: int) -> tuple[int, set[int]]:
        """Return the flow value and the source side of a minimum cut."""
        # flow[(u, w)] in {-1, 0, 1}; residual capacity of u->w is 1 - flow[(u, w)]
        flow: dict[tuple[int, int], int] = {}
        adj = self.adj
        value = 0
        while True:
            parent = {s: -1}
            queue = deque([s])
            while queue and t not in parent:
                u = queue.popleft()
                for w in adj[u]:
                    if w not in parent and flow.get((u, w), 0) < 1:
                        parent[w] = u
                        if w == t:
                            break
                        queue.append(w)
            if t not in parent:
                return value, set(parent)
            w = t
            while w != s:
                u = parent[w]
                flow[(u, w)] = flow.get((u, w), 0) + 1
                flow[(w, u)] = flow.get((w, u), 0) - 1
                w = u
            value += 1


def _components(g: Graph) -> list[list[Node]]:
    seen: set[Node] = set()
    comps = []
    for v in g.sorted_nodes():
        if v in seen:
            continue
        comp = sorted(_bfs_distances(g, v), key=_sort_key)
        seen.update(comp)
        comps.append(comp)
    return comps


def min_cut(g: Graph, u: Node, v: Node) -> int:
    """Minimum number of edges whose removal separates ``u`` from ``v``."""
    _check(g, u)
    _check(g, v)
    if u == v:
        raise ValueError("min cut needs two distinct nodes")
    comp = _bfs_distances(g, u)
    if v not in comp:
        return 0
    nodes = sorted(comp, key=_sort_key)
    net = _UnitFlow(g, nodes)
    return net.max_flow(net.index[u], net.index[v])[0]


def _flow_equivalent_tree(g: Graph, comp: list[Node]) -> tuple[list[int], list[int]]:
    """Gusfield's flow-equivalent tree of one connected component.

    Returns ``(parent, weight)`` indexed like ``comp``; the min cut between two
    nodes is the smallest weight on their tree path.
    """
    n = len(comp)
    net = _UnitFlow(g, comp)
    parent = [0] * n
    weight = [0] * n
    for s in range(1, n):
        t = parent[s]
        value, side = net.max_flow(s, t)
        weight[s] = value
        for j in range(s + 1, n):
            if j in side and parent[j] == t:
                parent[j] = s
    return parent, weight


def _pairwise_cut_sums(g: Graph, comp: list[Node]) -> dict[Node, int]:
    """Sum over the other nodes of the component of MinCut(u, v), for every v."""
    n = len(comp)
    if n == 1:
        return {comp[0]: 0}
    parent, weight = _flow_equivalent_tree(g, comp)
    tree: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for s in range(1, n):
        tree[s].append((parent[s], weight[s]))
        tree[parent[s]].append((s, weight[s]))
    sums = {}
    for i in range(n):
        # bottleneck (min edge weight) from i to every tree node
        best = {i: None}
        stack = [i]
        total = 0
        while stack:
            a = stack.pop()
            for b, w in tree[a]:
                if b not in best:
                    bw = w if best[a] is None else min(best[a], w)
                    best[b] = bw
                    total += bw
                    stack.append(b)
        sums[comp[i]] = total
    return sums


def avg_min_cut(g: Graph, v: Node) -> float:
    """Averaged minimum cut of ``v``: ``sum_{u != v} MinCut(u, v) / n``."""
    _check(g, v)
    total = sum(min_cut(g, u, v) for u in g.sorted_nodes() if u != v)
    return total / len(g)


def avg_min_cut_all(
    g: Graph,
    sample_size: int | None = None,
    sample_threshold: int = DEFAULT_SAMPLE_THRESHOLD,
    seed: int = 0,
) -> tuple[dict[Node, float], int | None]:
    """Averaged min cut of every node.

    Exact by default. When ``sample_size`` is given and the graph has more than
    ``sample_threshold`` nodes, each node's sum is estimated from max-flows to
    a uniform sample of ``sample_size`` partner nodes, scaled up to ``n - 1``
    partners. Returns the values and the sample size actually used (``None``
    when exact).
    """
    n = len(g)
    if n == 0:
        return {}, None
    if sample_size is not None and n > sample_threshold:
        return _sampled_avg_min_cut(g, sample_size, seed), sample_size
    sums: dict[Node, int] = {}
    for comp in _components(g):
        sums.update(_pairwise_cut_sums(g, comp))
    return {v: sums[v] / n for v in g.sorted_nodes()}, None


def _sampled_avg_min_cut(g: Graph, sample_size: int, seed: int) -> dict[Node, float]:
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    nodes = g.sorted_nodes()
    n = len(nodes)
    rng = random.Random(seed)
    partners = rng.sample(nodes, min(sample_size, n))
    comp_of = {}
    nets = {}
    for ci, comp in enumerate(_components(g)):
        nets[ci] = _UnitFlow(g, comp)
        for v in comp:
            comp_of[v] = ci
    out = {}
    for v in nodes:
        net = nets[comp_of[v]]
        others = [u for u in partners if u != v]
        if not others:
            out[v] = 0.0
            continue
        total = 0
        for u in others:
            if comp_of[u] == comp_of[v]:
                total += net.max_flow(net.index[u], net.index[v])[0]
        out[v] = total * (n - 1) / len(others) / n
    return out


# --------------------------------------------------------------------------
# Bundles and IO
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NodeMetrics:
    degree: int
    betweenness: float
    closeness: float
    coreness: int
    eccentricity: int
    is_articulation: bool
    avg_min_cut: float


def all_metrics(
    g: Graph,
    sample_size: int | None = None,
    sample_threshold: int = DEFAULT_SAMPLE_THRESHOLD,
    seed: int = 0,
) -> dict[Node, NodeMetrics]:
    """All seven measures for every node, sharing one BFS per source."""
    nodes = g.sorted_nodes()
    acc = dict.fromkeys(nodes, 0.0)
    close = {}
    ecc = {}
    for s in nodes:
        dist = _brandes_source(g, s, acc)
        total = sum(dist.values())
        close[s] = 1.0 / total if total else 0.0
        ecc[s] = max(dist.values())
    core = coreness_all(g)
    cuts = articulation_points(g)
    mc, _ = avg_min_cut_all(g, sample_size, sample_threshold, seed)
    return {
        v: NodeMetrics(
            degree=len(g.neighbors(v)),
            betweenness=acc[v] / 2.0,
            closeness=close[v],
            coreness=core[v],
            eccentricity=ecc[v],
            is_articulation=v in cuts,
            avg_min_cut=mc[v],
        )
        for v in nodes
    }


def write_edge_list(g: Graph, path: str | Path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for u, v in g.edge_pairs():
            fh.write(f"{u}\t{v}\n")


def read_edge_list(path: str | Path) -> Graph:
    edges = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not all(parts):
                raise ValueError(f"{path}:{lineno}: expected '<node>\\t<node>'")
            edges.append((parts[0], parts[1]))
    return Graph(edges)


def write_metrics_csv(metrics: dict[Node, NodeMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node_id",) + METRIC_FIELDS)
        for v in sorted(metrics, key=_sort_key):
            m = metrics[v]
            w.writerow(
                [v, m.degree, repr(m.betweenness), repr(m.closeness), m.coreness,
                 m.eccentricity, str(m.is_articulation).lower(), repr(m.avg_min_cut)]
            )
