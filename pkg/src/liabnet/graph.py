"""Directed acyclic cancellation networks: construction, validation, paths.

A network is a DAG with a unique source (the node first hit by a shock),
one or more sinks, and a non-negative loss attached to every edge. Nodes
are exposed as string labels but handled internally as dense integer
indices that respect a topological order, so index(i) < index(j) whenever
there is an edge i -> j.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Num = Union[int, float, Fraction]
Edge = tuple[int, int]
LabelEdge = tuple[str, str]


class GraphError(Exception):
    """Base error for graph construction and queries."""


class GraphValidationError(GraphError):
    """Raised when raw node/edge data does not form a valid network."""


class PathCapExceeded(GraphError):
    """Raised when an enumeration would produce more paths than allowed."""


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validating raw node/edge lists.

    `checks` are hard requirements; `warnings` flag structural features
    (currently: a bottleneck node that lies on every path) that do not
    prevent construction.
    """

    checks: tuple[CheckResult, ...]
    warnings: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True, eq=False)
class Dag:
    """Immutable DAG with a unique source and topologically sorted indices.

    Fields:
        labels: node labels; position in the tuple is the node index.
        edges: sorted (u, v) index pairs, u < v.
        succ / pred: per-node sorted neighbor indices.
        source: index of the unique in-degree-0 node (always 0).
        sinks: indices of out-degree-0 nodes.
    """

    labels: tuple[str, ...]
    edges: tuple[Edge, ...]
    succ: tuple[tuple[int, ...], ...]
    pred: tuple[tuple[int, ...], ...]
    source: int
    sinks: frozenset[int]
    _index: dict = field(repr=False)
    _edge_set: frozenset = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise GraphError(f"unknown node label: {label!r}") from None

    def label(self, i: int) -> str:
        return self.labels[i]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_set

    def out_degree(self, i: int) -> int:
        return len(self.succ[i])

    def is_sink(self, i: int) -> bool:
        return i in self.sinks

    def deciders(self) -> tuple[int, ...]:
        """Nodes with two or more outgoing edges (real choices to make)."""
        return tuple(i for i in range(self.n) if len(self.succ[i]) >= 2)

    def edge_labels(self) -> tuple[LabelEdge, ...]:
        return tuple((self.labels[u], self.labels[v]) for u, v in self.edges)


@dataclass(frozen=True)
class Path:
    """Source-to-sink node sequence; hashable so paths can live in sets."""

    nodes: tuple[int, ...]

    @property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(zip(self.nodes, self.nodes[1:]))

    @property
    def movers(self) -> tuple[int, ...]:
        """Non-sink nodes of the path (each chose the next edge)."""
        return self.nodes[:-1]

    @property
    def sink(self) -> int:
        return self.nodes[-1]

    def labels(self, dag: Dag) -> tuple[str, ...]:
        return tuple(dag.labels[i] for i in self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)


# ---------------------------------------------------------------------------
# construction and validation


def _structural_checks(
    nodes: Sequence[str], edges: Sequence[LabelEdge], source: str | None
) -> tuple[list[CheckResult], tuple[str, ...] | None, list[LabelEdge]]:
    """Run hard validation checks on raw data.

    Returns (checks, topo_order_labels or None, normalized_edges). The topo
    order is None whenever any check failed.
    """
    checks: list[CheckResult] = []
    seen: set[str] = set()
    dup = [x for x in nodes if x in seen or seen.add(x)]
    edge_pairs: list[LabelEdge] = []
    bad: list[str] = []
    if dup:
        bad.append(f"duplicate node labels: {sorted(set(dup))}")
    known = set(nodes)
    eseen: set[LabelEdge] = set()
    for e in edges:
        u, v = e
        if u not in known or v not in known:
            bad.append(f"edge ({u!r}, {v!r}) references an unknown node")
            continue
        if u == v:
            bad.append(f"self-loop at {u!r}")
            continue
        if (u, v) in eseen:
            bad.append(f"duplicate edge ({u!r}, {v!r})")
            continue
        eseen.add((u, v))
        edge_pairs.append((u, v))
    checks.append(
        CheckResult("labels", not bad, "; ".join(bad) if bad else "labels and edges well formed")
    )
    checks.append(
        CheckResult(
            "min_size",
            len(nodes) >= 3,
            f"{len(nodes)} nodes (need at least 3)",
        )
    )
    if bad:
        return checks, None, edge_pairs

    pos = {x: k for k, x in enumerate(nodes)}
    indeg = {x: 0 for x in nodes}
    out: dict[str, list[str]] = {x: [] for x in nodes}
    for u, v in edge_pairs:
        indeg[v] += 1
        out[u].append(v)

    # Kahn's algorithm; ties broken by input position for reproducibility.
    heap = [pos[x] for x in nodes if indeg[x] == 0]
    heapq.heapify(heap)
    order: list[str] = []
    deg = dict(indeg)
    while heap:
        x = nodes[heapq.heappop(heap)]
        order.append(x)
        for y in out[x]:
            deg[y] -= 1
            if deg[y] == 0:
                heapq.heappush(heap, pos[y])
    acyclic = len(order) == len(nodes)
    checks.append(
        CheckResult(
            "acyclic",
            acyclic,
            "topological order exists" if acyclic else "cycle detected",
        )
    )

    roots = [x for x in nodes if indeg[x] == 0]
    if source is not None and source not in known:
        checks.append(CheckResult("unique_source", False, f"declared source {source!r} unknown"))
    elif not roots:
        checks.append(CheckResult("unique_source", False, "zero nodes with in-degree 0"))
    elif len(roots) > 1:
        checks.append(
            CheckResult("unique_source", False, f"multiple in-degree-0 nodes: {roots}")
        )
    elif source is not None and roots[0] != source:
        checks.append(
            CheckResult(
                "unique_source",
                False,
                f"declared source {source!r} but in-degree-0 node is {roots[0]!r}",
            )
        )
    else:
        checks.append(CheckResult("unique_source", True, f"source is {roots[0]!r}"))

    if acyclic and len(roots) == 1:
        reach = {roots[0]}
        stack = [roots[0]]
        while stack:
            x = stack.pop()
            for y in out[x]:
                if y not in reach:
                    reach.add(y)
                    stack.append(y)
        unreachable = [x for x in nodes if x not in reach]
        checks.append(
            CheckResult(
                "connected",
                not unreachable,
                "every node reachable from the source"
                if not unreachable
                else f"unreachable nodes: {unreachable}",
            )
        )
        sinks = [x for x in nodes if not out[x]]
        checks.append(
            CheckResult("sinks", bool(sinks), f"sinks: {sinks}" if sinks else "no sink node")
        )
    ok = all(c.passed for c in checks)
    return checks, tuple(order) if ok else None, edge_pairs


def build_dag(
    nodes: Sequence[str], edges: Sequence[LabelEdge], source: str | None = None
) -> Dag:
    """Construct a Dag from raw label data, raising on invalid input.

    Args:
        nodes: node labels (unique).
        edges: (from, to) label pairs.
        source: optional declared source label; checked against the unique
            in-degree-0 node if given.

    Raises:
        GraphValidationError: listing every failed structural check.
    """
    checks, order, edge_pairs = _structural_checks(nodes, edges, source)
    if order is None:
        msgs = "; ".join(f"{c.name}: {c.detail}" for c in checks if not c.passed)
        raise GraphValidationError(msgs)
    index = {x: k for k, x in enumerate(order)}
    idx_edges = sorted((index[u], index[v]) for u, v in edge_pairs)
    succ: list[list[int]] = [[] for _ in order]
    pred: list[list[int]] = [[] for _ in order]
    for u, v in idx_edges:
        succ[u].append(v)
        pred[v].append(u)
    sinks = frozenset(i for i, s in enumerate(succ) if not s)
    return Dag(
        labels=tuple(order),
        edges=tuple(idx_edges),
        succ=tuple(tuple(s) for s in succ),
        pred=tuple(tuple(p) for p in pred),
        source=0,
        sinks=sinks,
        _index=index,
        _edge_set=frozenset(idx_edges),
    )


def validate(
    nodes: Sequence[str], edges: Sequence[LabelEdge], source: str | None = None
) -> ValidationReport:
    """Validate raw node/edge lists without raising.

    Hard checks: well-formed labels, at least 3 nodes, acyclicity, a unique
    in-degree-0 source, reachability of every node, existence of a sink.
    Soft check (warning only): a bottleneck, i.e. an interior node lying on
    every source-to-sink path. Weights and equilibria stay computable with
    a bottleneck; only the characterization-style tests exclude it.
    """
    checks, order, _ = _structural_checks(nodes, edges, source)
    warnings: list[str] = []
    if order is not None:
        dag = build_dag(nodes, edges, source)
        for i in range(dag.n):
            if i == dag.source or i in dag.sinks:
                continue
            if _count_paths_avoiding(dag, i) == 0:
                warnings.append(
                    f"bottleneck: node {dag.labels[i]!r} lies on every source-sink path"
                )
    return ValidationReport(checks=tuple(checks), warnings=tuple(warnings))


def _count_paths_avoiding(dag: Dag, banned: int) -> int:
    ways = [0] * dag.n
    ways[dag.source] = 1
    for i in range(dag.n):
        if i == banned or not ways[i]:
            continue
        for j in dag.succ[i]:
            if j != banned:
                ways[j] += ways[i]
    return sum(ways[t] for t in dag.sinks)


# ---------------------------------------------------------------------------
# paths


def count_paths(dag: Dag) -> int:
    """Exact number of source-to-sink paths (arbitrary precision)."""
    ways = [0] * dag.n
    ways[dag.source] = 1
    for i in range(dag.n):
        w = ways[i]
        if w:
            for j in dag.succ[i]:
                ways[j] += w
    return sum(ways[t] for t in dag.sinks)


def enumerate_paths(dag: Dag, cap: int | None = None) -> list[Path]:
    """All source-to-sink paths in lexicographic order of node indices.

    Args:
        cap: optional upper bound; exceeding it raises PathCapExceeded
            instead of blowing up memory.
    """
    out: list[Path] = []
    stack: list[int] = [dag.source]

    def emit() -> None:
        if cap is not None and len(out) >= cap:
            raise PathCapExceeded(f"more than {cap} paths")
        out.append(Path(tuple(stack)))

    def walk(i: int) -> None:
        if not dag.succ[i]:
            emit()
            return
        for j in dag.succ[i]:
            stack.append(j)
            walk(j)
            stack.pop()

    walk(dag.source)
    return out


def check_losses(dag: Dag, losses: Mapping[Edge, Num]) -> None:
    """Verify that `losses` is total, finite and non-negative on dag edges."""
    for e in dag.edges:
        if e not in losses:
            u, v = e
            raise GraphError(
                f"losses missing edge ({dag.labels[u]!r}, {dag.labels[v]!r})"
            )
        x = losses[e]
        if isinstance(x, float) and x != x:
            raise GraphError(f"loss on edge {e} is NaN")
        if x < 0 or (isinstance(x, float) and x == float("inf")):
            raise GraphError(f"loss on edge {e} must be finite and >= 0, got {x}")


def path_loss(losses: Mapping[Edge, Num], path: Path) -> Num:
    return sum(losses[e] for e in path.edges)


def exact_valued(losses: Mapping[Edge, Num]) -> bool:
    """True when every loss is an integer or rational (exact comparisons)."""
    for x in losses.values():
        if isinstance(x, float) and not x.is_integer():
            return False
    return True


@dataclass(frozen=True)
class EfficiencyResult:
    """Cheapest total loss, the set of paths achieving it, and per-node
    cheapest continuation costs."""

    min_cost: Num
    paths: tuple[Path, ...]
    continuation: tuple[Num, ...]

    def path_set(self) -> frozenset[tuple[int, ...]]:
        return frozenset(p.nodes for p in self.paths)

    def to_dict(self, dag: Dag) -> dict:
        return {
            "min_cost": float(self.min_cost),
            "paths": [list(p.labels(dag)) for p in self.paths],
            "continuation": {
                dag.labels[i]: float(c) for i, c in enumerate(self.continuation)
            },
        }


def continuation_costs(dag: Dag, losses: Mapping[Edge, Num]) -> list[Num]:
    """Cheapest node-to-sink cost for every node, by backward DP."""
    L: list[Num] = [0] * dag.n
    for i in range(dag.n - 1, -1, -1):
        if dag.succ[i]:
            L[i] = min(losses[(i, j)] + L[j] for j in dag.succ[i])
    return L


def efficient_paths(
    dag: Dag,
    losses: Mapping[Edge, Num],
    tie_tolerance: float | None = None,
    cap: int | None = None,
) -> EfficiencyResult:
    """Compute the cheapest paths and continuation costs.

    A path is kept iff every step (i, j) satisfies
    loss(i,j) + L_j <= L_i + tie_tolerance. With exact-valued losses the
    default tolerance is 0 and the set is exact; for float data the default
    is 1e-9 absolute.

    Args:
        tie_tolerance: override for the tie comparison; None picks the
            default described above.
        cap: optional bound on the number of efficient paths returned.
    """
    check_losses(dag, losses)
    if tie_tolerance is None:
        tie_tolerance = 0 if exact_valued(losses) else 1e-9
    L = continuation_costs(dag, losses)
    out: list[Path] = []
    stack = [dag.source]

    def walk(i: int) -> None:
        if not dag.succ[i]:
            if cap is not None and len(out) >= cap:
                raise PathCapExceeded(f"more than {cap} efficient paths")
            out.append(Path(tuple(stack)))
            return
        for j in dag.succ[i]:
            if losses[(i, j)] + L[j] <= L[i] + tie_tolerance:
                stack.append(j)
                walk(j)
                stack.pop()

    walk(dag.source)
    return EfficiencyResult(min_cost=L[dag.source], paths=tuple(out), continuation=tuple(L))


# ---------------------------------------------------------------------------
# subgraphs


def reachable_subgraph(
    graph: Dag | tuple[Sequence[str], Sequence[LabelEdge]], root: str
) -> Dag:
    """Induced subgraph on nodes reachable from `root`, as a fresh Dag.

    Accepts either a built Dag or raw (labels, edge-label-pairs), so it also
    applies to multi-source graphs that cannot be built directly. Labels are
    preserved; `root` becomes the unique source.
    """
    if isinstance(graph, Dag):
        labels: Sequence[str] = graph.labels
        edges: Sequence[LabelEdge] = graph.edge_labels()
    else:
        labels, edges = graph
    if root not in set(labels):
        raise GraphError(f"root {root!r} not present in graph")
    out: dict[str, list[str]] = {x: [] for x in labels}
    for u, v in edges:
        out[u].append(v)
    reach = {root}
    stack = [root]
    while stack:
        x = stack.pop()
        for y in out[x]:
            if y not in reach:
                reach.add(y)
                stack.append(y)
    sub_nodes = [x for x in labels if x in reach]
    sub_edges = [(u, v) for u, v in edges if u in reach]
    return build_dag(sub_nodes, sub_edges, source=root)
