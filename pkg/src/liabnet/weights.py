"""Importance weights for the fixed-weight liability rule.

The canonical weights split 1/|paths| equally among each path's non-sink
nodes and sum over paths. They equal the Shapley value of the cooperative
game in which a coalition's worth is the fraction of source-to-sink paths
whose non-sink nodes it contains. Three independent computations are
provided so they can cross-check each other:

- `wstar_enumerate`: direct sum over enumerated paths.
- `shapley_bruteforce`: exact Shapley value over all coalitions.
- `wstar_dp`: subpath-count tables plus a per-node convolution, which scales
  to graphs far beyond enumeration (thousands of nodes, 1e17 paths).

All three return exact rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from .graph import Dag, Num, count_paths, enumerate_paths

# Above this path count the Shapley brute force switches from enumerating
# paths to a per-coalition DP (slower per coalition, no enumeration).
_SOS_PATH_LIMIT = 50_000


class WeightsError(Exception):
    """Raised on coalition or size-cap violations."""


@dataclass(frozen=True)
class WeightVector:
    """Point of the simplex over all nodes, aligned with dag indices."""

    values: tuple[Num, ...]

    def __getitem__(self, i: int) -> Num:
        return self.values[i]

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.values)

    def as_dict(self, dag: Dag) -> dict[str, float]:
        return {dag.labels[i]: float(x) for i, x in enumerate(self.values)}

    def check_simplex(self, tol: float = 1e-12) -> None:
        if any(x < 0 for x in self.values):
            raise WeightsError("weights must be non-negative")
        total = sum(self.values)
        if abs(total - 1) > tol:
            raise WeightsError(f"weights must sum to 1 (got {float(total)})")

    def in_delta_star(self, dag: Dag) -> bool:
        """True iff every node with two or more outgoing edges has positive
        weight (the sufficiency condition for efficient equilibria)."""
        return all(self.values[i] > 0 for i in dag.deciders())

    @classmethod
    def from_mapping(cls, dag: Dag, mapping: Mapping[int, Num]) -> "WeightVector":
        return cls(tuple(mapping.get(i, 0) for i in range(dag.n)))


@dataclass(frozen=True)
class PathCountTables:
    """Subpath-count tables.

    forward[x][i]: subpaths from the source to i with exactly x edges.
    backward[y][i]: subpaths from i to any sink with exactly y edges.
    through[i][y]: full source-to-sink paths through i with y edges total.
    """

    forward: tuple[tuple[int, ...], ...]
    backward: tuple[tuple[int, ...], ...]
    through: tuple[tuple[int, ...], ...]
    total_paths: int


def path_count_tables(dag: Dag) -> PathCountTables:
    n = dag.n
    forward: list[list[int]] = []
    row = [0] * n
    row[dag.source] = 1
    while any(row):
        forward.append(row)
        nxt = [0] * n
        for j in range(n):
            acc = 0
            for i in dag.pred[j]:
                acc += row[i]
            nxt[j] = acc
        row = nxt

    backward: list[list[int]] = []
    row = [1 if i in dag.sinks else 0 for i in range(n)]
    while any(row):
        backward.append(row)
        nxt = [0] * n
        for i in range(n):
            acc = 0
            for j in dag.succ[i]:
                acc += row[j]
            nxt[i] = acc
        row = nxt

    max_len = len(forward) + len(backward) - 2
    through: list[tuple[int, ...]] = []
    for i in range(n):
        conv = [0] * (max_len + 1)
        xs = [(x, forward[x][i]) for x in range(len(forward)) if forward[x][i]]
        ys = [(y, backward[y][i]) for y in range(len(backward)) if backward[y][i]]
        for x, f in xs:
            for y, b in ys:
                conv[x + y] += f * b
        through.append(tuple(conv))

    total = sum(backward[y][dag.source] for y in range(len(backward)))
    return PathCountTables(
        forward=tuple(tuple(r) for r in forward),
        backward=tuple(tuple(r) for r in backward),
        through=tuple(through),
        total_paths=total,
    )


def wstar_dp(dag: Dag) -> WeightVector:
    """Canonical weights from subpath-count tables; scales to large graphs.

    For every non-sink i the weight is (1/|paths|) * sum_y through[i][y] / y,
    where y is the path's edge count (= its non-sink node count). Computed
    over a common denominator so the result is an exact rational.
    """
    tables = path_count_tables(dag)
    max_len = len(tables.through[0]) - 1
    denom = math.lcm(*range(1, max_len + 1))
    per_len = [0] * (max_len + 1)
    for y in range(1, max_len + 1):
        per_len[y] = denom // y
    values: list[Num] = []
    for i in range(dag.n):
        if i in dag.sinks:
            values.append(Fraction(0))
            continue
        acc = 0
        for y, cnt in enumerate(tables.through[i]):
            if cnt:
                acc += cnt * per_len[y]
        values.append(Fraction(acc, denom * tables.total_paths))
    return WeightVector(tuple(values))


def wstar_enumerate(dag: Dag, cap: int | None = None) -> WeightVector:
    """Canonical weights by direct summation over enumerated paths."""
    paths = enumerate_paths(dag, cap=cap)
    total = len(paths)
    acc = [Fraction(0)] * dag.n
    for p in paths:
        share = Fraction(1, len(p.movers) * total)
        for i in p.movers:
            acc[i] += share
    return WeightVector(tuple(acc))


def path_counting_value(dag: Dag, coalition: Iterable[int]) -> Fraction:
    """Worth of a coalition: the fraction of paths it covers.

    A path is covered when all of its non-sink nodes belong to the
    coalition. Computed by a forward DP restricted to coalition nodes; no
    enumeration. Sinks are exempt and may not be members.
    """
    members = frozenset(coalition)
    bad = members & dag.sinks
    if bad:
        raise WeightsError(
            f"coalition contains sink(s): {sorted(dag.labels[i] for i in bad)}"
        )
    ways = [0] * dag.n
    if dag.source in members:
        ways[dag.source] = 1
    for i in range(dag.n):
        w = ways[i]
        if not w:
            continue
        for j in dag.succ[i]:
            if j in dag.sinks or j in members:
                ways[j] += w
    covered = sum(ways[t] for t in dag.sinks)
    return Fraction(covered, count_paths(dag))


def _players(dag: Dag) -> list[int]:
    return [i for i in range(dag.n) if i not in dag.sinks]


def _coverage_counts(dag: Dag, players: Sequence[int]) -> list[int]:
    """counts[mask] = number of paths whose non-sink nodes all lie in mask."""
    k = len(players)
    bit = {node: 1 << p for p, node in enumerate(players)}
    counts = [0] * (1 << k)
    if count_paths(dag) <= _SOS_PATH_LIMIT:
        for path in enumerate_paths(dag):
            m = 0
            for i in path.movers:
                m |= bit[i]
            counts[m] += 1
        # subset-sum transform: counts[mask] <- sum over submasks
        for b in range(k):
            step = 1 << b
            for mask in range(1 << k):
                if mask & step:
                    counts[mask] += counts[mask ^ step]
        return counts
    src_bit = bit[dag.source]
    sinks = dag.sinks
    succ = dag.succ
    n = dag.n
    for mask in range(1 << k):
        if not mask & src_bit:
            continue
        ways = [0] * n
        ways[dag.source] = 1
        covered = 0
        for i in range(n):
            w = ways[i]
            if not w:
                continue
            if i in sinks:
                covered += w
                continue
            for j in succ[i]:
                if j in sinks or bit[j] & mask:
                    ways[j] += w
        counts[mask] = covered
    return counts


def shapley_bruteforce(dag: Dag, player_cap: int = 20) -> WeightVector:
    """Exact Shapley value of the path-counting game, in rationals.

    Exponential in the number of non-sink nodes; refuses above
    `player_cap` players.
    """
    players = _players(dag)
    k = len(players)
    if k > player_cap:
        raise WeightsError(f"{k} non-sink players exceeds cap {player_cap}")
    counts = _coverage_counts(dag, players)
    total = counts[(1 << k) - 1]
    fact = [math.factorial(x) for x in range(k + 1)]
    popcount = [0] * (1 << k)
    for m in range(1, 1 << k):
        popcount[m] = popcount[m >> 1] + (m & 1)
    values: list[Num] = [Fraction(0)] * dag.n
    for p, node in enumerate(players):
        b = 1 << p
        acc = 0
        for mask in range(1 << k):
            if mask & b:
                continue
            size = popcount[mask]
            acc += fact[size] * fact[k - 1 - size] * (counts[mask | b] - counts[mask])
        values[node] = Fraction(acc, fact[k] * total)
    return WeightVector(tuple(values))


def core_check(
    dag: Dag,
    weights: Union[WeightVector, Mapping[int, Num], Sequence[Num]],
    coalitions: Iterable[Iterable[int]] | None = None,
    tol: float = 1e-12,
    player_cap: int = 20,
) -> list[dict]:
    """Coalitions whose members' total weight falls below their worth.

    With `coalitions` unset, every subset of non-sink nodes is checked
    (exponential; capped at `player_cap` players). Returns one record per
    violation: members, weight sum, coalition worth, deficit.
    """
    if isinstance(weights, WeightVector):
        wv = weights.values
    elif isinstance(weights, Mapping):
        wv = tuple(weights.get(i, 0) for i in range(dag.n))
    else:
        wv = tuple(weights)

    def record(nodes: tuple[int, ...], value: Fraction) -> dict | None:
        wsum = sum(wv[i] for i in nodes)
        if value - wsum > tol:
            return {
                "coalition": tuple(dag.labels[i] for i in nodes),
                "weight_sum": float(wsum),
                "value": float(value),
                "deficit": float(value - wsum),
            }
        return None

    violations: list[dict] = []
    if coalitions is not None:
        for coalition in coalitions:
            nodes = tuple(sorted(set(coalition)))
            hit = record(nodes, path_counting_value(dag, nodes))
            if hit:
                violations.append(hit)
        return violations

    players = _players(dag)
    k = len(players)
    if k > player_cap:
        raise WeightsError(
            f"{k} non-sink players exceeds cap {player_cap}; pass explicit coalitions"
        )
    counts = _coverage_counts(dag, players)
    total = counts[(1 << k) - 1]
    for mask in range(1 << k):
        nodes = tuple(players[p] for p in range(k) if mask & (1 << p))
        hit = record(nodes, Fraction(counts[mask], total))
        if hit:
            violations.append(hit)
    return violations
