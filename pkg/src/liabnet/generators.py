"""Seeded random instance generators shared by the checkers and the tests.

All generators take a `random.Random` so callers control determinism; the
axiom checkers derive one per trial from a master seed.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .graph import Dag, Edge, build_dag, count_paths


def random_dag(
    rng: random.Random,
    min_nodes: int = 4,
    max_nodes: int = 8,
    density: float = 0.4,
) -> Dag:
    """Random DAG with node 0 as the unique source.

    Nodes are created in index order; each candidate edge (i, j), i < j, is
    kept with probability `density`, and every node after the first gets a
    fallback incoming edge so the source is unique and everything is
    reachable. Node n-1 never has outgoing edges, so a sink always exists.
    """
    n = rng.randint(min_nodes, max_nodes)
    labels = [f"n{i}" for i in range(n)]
    labels[0] = "s"
    edges: list[tuple[str, str]] = []
    for j in range(1, n):
        preds = [i for i in range(j) if rng.random() < density]
        if not preds:
            preds = [rng.randrange(j)]
        for i in preds:
            edges.append((labels[i], labels[j]))
    return build_dag(labels, edges)


def random_losses(
    rng: random.Random, dag: Dag, low: int = 0, high: int = 9
) -> dict[Edge, int]:
    """Integer edge losses drawn uniformly from [low, high]."""
    return {e: rng.randint(low, high) for e in dag.edges}


def random_dag_with_paths(
    rng: random.Random,
    min_nonsinks: int,
    max_nonsinks: int,
    max_paths: int,
    density: float = 0.4,
    tries: int = 1000,
) -> Dag:
    """Random DAG whose non-sink count and path count fall in given bounds."""
    for _ in range(tries):
        # A couple of extra nodes leaves room for sinks.
        dag = random_dag(rng, min_nonsinks + 1, max_nonsinks + 3, density)
        nonsinks = dag.n - len(dag.sinks)
        if min_nonsinks <= nonsinks <= max_nonsinks and count_paths(dag) <= max_paths:
            return dag
    raise RuntimeError("could not generate a DAG within bounds")


def random_simplex_weights(
    rng: random.Random, dag: Dag, positive_deciders: bool = True
) -> dict[int, Fraction]:
    """Random rational point of the simplex over all nodes.

    With `positive_deciders`, every node with out-degree >= 2 gets a strictly
    positive weight; other nodes may draw 0.
    """
    deciders = set(dag.deciders())
    raw = []
    for i in range(dag.n):
        lo = 1 if (positive_deciders and i in deciders) else 0
        raw.append(rng.randint(lo, 9))
    if sum(raw) == 0:
        raw[dag.source] = 1
    total = sum(raw)
    return {i: Fraction(raw[i], total) for i in range(dag.n)}
