"""Sequential cancellation game and its exact equilibrium outcome sets.

Play starts at the source; whoever holds the order picks one outgoing
edge, realizing its loss, until a sink is reached. The liability rule then
splits the realized path's total loss. Every agent minimizes their own
payment, so the solution concept is pure-strategy subgame-perfect
equilibrium (SPE), and the object of interest is the full set of paths
some SPE realizes.

`spe_outcomes` computes that set by set-valued backward induction:
an outcome surviving at a node must be no worse for the mover than the
worst credible continuation of every alternative edge (the continuations
of the alternative act as threats). `spe_bruteforce` is the definitional
oracle: enumerate every pure strategy profile over all histories and keep
the ones with no profitable one-shot deviation anywhere, on or off the
realized path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .graph import (
    Dag,
    Edge,
    Num,
    Path,
    continuation_costs,
    exact_valued,
    path_loss,
)
from .rules import (
    MODE_OWN_EDGE,
    MODE_TOTALS,
    BoundRule,
    Rule,
)


class GameError(Exception):
    """Raised when a game computation exceeds its stated caps."""


class HistoryCapExceeded(GameError):
    pass


class ProfileCapExceeded(GameError):
    pass


def _tolerance(losses: Mapping[Edge, Num]) -> float:
    return 0.0 if exact_valued(losses) else 1e-9


def _upper(bound_value: Num, tol: float) -> Num:
    # adding a float tol to a Fraction would silently coerce to float and
    # break exact comparisons, so only widen when a tolerance is in force
    return bound_value if tol == 0 else bound_value + tol


def history_count(dag: Dag) -> int:
    """Number of subpaths starting at the source (game histories)."""
    counts = [0] * dag.n
    counts[dag.source] = 1
    total = 0
    for i in range(dag.n):
        total += counts[i]
        for j in dag.succ[i]:
            counts[j] += counts[i]
    return total


def profile_count(dag: Dag) -> int:
    """Number of pure strategy profiles: every history ending at a node
    with outgoing edges picks one of them independently."""
    counts = [0] * dag.n
    counts[dag.source] = 1
    result = 1
    for i in range(dag.n):
        for j in dag.succ[i]:
            counts[j] += counts[i]
        if dag.succ[i]:
            result *= len(dag.succ[i]) ** counts[i]
    return result


# ---------------------------------------------------------------------------
# set-valued backward induction


def _node_memo_totals(dag: Dag, losses, cares, tol):
    # suffix sets per node: the mover's payment is monotone in the final
    # total, and the prefix cost is a constant inside each subgame, so
    # suffix totals rank continuations identically at every history
    memo: dict[int, list[tuple[tuple[int, ...], Num]]] = {}
    for i in range(dag.n - 1, -1, -1):
        if not dag.succ[i]:
            memo[i] = [((i,), 0)]
            continue
        per_action: list[list[tuple[tuple[int, ...], Num]]] = []
        caps: list[Num] = []
        for j in dag.succ[i]:
            step = losses[(i, j)]
            cont = [((i,) + suffix, step + total) for suffix, total in memo[j]]
            per_action.append(cont)
            caps.append(max(total for _, total in cont))
        if cares[i]:
            limit = _upper(min(caps), tol)
            memo[i] = [
                item
                for cont in per_action
                for item in cont
                if item[1] <= limit
            ]
        else:
            memo[i] = [item for cont in per_action for item in cont]
    return memo


def _node_memo_own_edge(dag: Dag, losses, tol):
    # the mover pays only for the edge they cancel, so they pick a cheapest
    # outgoing edge and are indifferent across everything downstream
    memo: dict[int, list[tuple[int, ...]]] = {}
    for i in range(dag.n - 1, -1, -1):
        if not dag.succ[i]:
            memo[i] = [(i,)]
            continue
        cheapest = _upper(min(losses[(i, j)] for j in dag.succ[i]), tol)
        memo[i] = [
            (i,) + suffix
            for j in dag.succ[i]
            if losses[(i, j)] <= cheapest
            for suffix in memo[j]
        ]
    return memo


class SpeSolution:
    """Solved game: SPE outcome sets for the whole game and every subgame.

    Subgames of total-monotone and own-edge rules share per-node suffix
    sets, so continuation queries are cheap; history-dependent rules fall
    back to per-history memoization bounded by `history_cap`.
    """

    def __init__(
        self,
        dag: Dag,
        losses: Mapping[Edge, Num],
        rule: Rule,
        history_cap: int = 1_000_000,
    ):
        self.dag = dag
        self.losses = losses
        self.bound = rule.bind(losses)
        self.tol = _tolerance(losses)
        self._history_cap = history_cap
        self._node_memo = None
        if self.bound.mode == MODE_TOTALS:
            self._node_memo = {
                i: [sfx for sfx, _ in items]
                for i, items in _node_memo_totals(
                    dag, losses, self.bound.cares, self.tol
                ).items()
            }
        elif self.bound.mode == MODE_OWN_EDGE:
            self._node_memo = _node_memo_own_edge(dag, losses, self.tol)
        else:
            self._hist_memo: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
            self._pay_cache: dict[tuple[int, ...], tuple[Num, ...]] = {}

    def _pay(self, path_nodes: tuple[int, ...], agent: int) -> Num:
        vec = self._pay_cache.get(path_nodes)
        if vec is None:
            vec = self.bound.vector(Path(path_nodes))
            self._pay_cache[path_nodes] = vec
        return vec[agent]

    def _solve_history(self, hist: tuple[int, ...]) -> list[tuple[int, ...]]:
        got = self._hist_memo.get(hist)
        if got is not None:
            return got
        if len(self._hist_memo) >= self._history_cap:
            raise HistoryCapExceeded(
                f"more than {self._history_cap} histories; raise history_cap"
            )
        mover = hist[-1]
        if not self.dag.succ[mover]:
            result = [hist]
        else:
            per_action = [self._solve_history(hist + (j,)) for j in self.dag.succ[mover]]
            caps = [max(self._pay(o, mover) for o in cont) for cont in per_action]
            limit = _upper(min(caps), self.tol)
            result = [
                o
                for cont in per_action
                for o in cont
                if self._pay(o, mover) <= limit
            ]
        self._hist_memo[hist] = result
        return result

    def _check_history(self, history: tuple[int, ...]) -> None:
        if not history or history[0] != self.dag.source:
            raise GameError(f"history must start at the source: {history}")
        for u, v in zip(history, history[1:]):
            if not self.dag.has_edge(u, v):
                raise GameError(f"history uses missing edge ({u}, {v})")

    def continuations(self, history: tuple[int, ...]) -> set[Path]:
        """SPE outcomes of the subgame after `history`, as full paths."""
        self._check_history(history)
        if self._node_memo is not None:
            prefix = history[:-1]
            return {Path(prefix + sfx) for sfx in self._node_memo[history[-1]]}
        return {Path(p) for p in self._solve_history(history)}

    def outcomes(self) -> set[Path]:
        return self.continuations((self.dag.source,))


def spe_solve(
    dag: Dag,
    losses: Mapping[Edge, Num],
    rule: Rule,
    history_cap: int = 1_000_000,
) -> SpeSolution:
    return SpeSolution(dag, losses, rule, history_cap)


def spe_outcomes(
    dag: Dag,
    losses: Mapping[Edge, Num],
    rule: Rule,
    history_cap: int = 1_000_000,
) -> set[Path]:
    """Exact set of SPE outcome paths, minimizing each agent's liability.

    Comparisons are exact when losses are exact-valued, else use a 1e-9
    tolerance. Rules whose payments are monotone in the realized total are
    solved with per-node suffix sets; history-dependent rules fall back to
    a per-history recursion bounded by `history_cap`.
    """
    return SpeSolution(dag, losses, rule, history_cap).outcomes()


# ---------------------------------------------------------------------------
# brute-force oracle


@dataclass
class _GameTables:
    histories: list[tuple[int, ...]]  # breadth-first, parents before children
    children: list[list[int] | None]  # per history: child history indices
    decisions: list[int]  # history indices where a choice exists
    terminal_pid: dict[int, int]  # terminal history index -> path id
    paths: list[tuple[int, ...]]
    pay: list[tuple[Num, ...]]  # path id -> liability vector


def _build_tables(dag: Dag, bound: BoundRule) -> _GameTables:
    histories: list[tuple[int, ...]] = [(dag.source,)]
    children: list[list[int] | None] = []
    decisions: list[int] = []
    terminal_pid: dict[int, int] = {}
    paths: list[tuple[int, ...]] = []
    pay: list[tuple[Num, ...]] = []
    idx = 0
    while idx < len(histories):
        hist = histories[idx]
        mover = hist[-1]
        if dag.succ[mover]:
            kids = []
            for j in dag.succ[mover]:
                kids.append(len(histories))
                histories.append(hist + (j,))
            children.append(kids)
            decisions.append(idx)
        else:
            children.append(None)
            terminal_pid[idx] = len(paths)
            paths.append(hist)
            pay.append(tuple(bound.vector(Path(hist))))
        idx += 1
    return _GameTables(histories, children, decisions, terminal_pid, paths, pay)


def _spe_profiles(dag: Dag, losses, rule: Rule, profile_cap: int):
    """Yield (tables, choices, play) for every SPE profile.

    `choices[k]` is the successor position chosen at decision history
    `tables.decisions[k]`; `play[h]` is the path id each history leads to
    under the profile.
    """
    bound = rule.bind(losses)
    total = profile_count(dag)
    if total > profile_cap:
        raise ProfileCapExceeded(
            f"{total} strategy profiles exceed the cap of {profile_cap}"
        )
    tables = _build_tables(dag, bound)
    pay_exact = exact_valued(losses) and all(
        isinstance(v, (int, Fraction)) for vec in tables.pay for v in vec
    )
    tol = 0.0 if pay_exact else 1e-9
    n_hist = len(tables.histories)
    decisions = tables.decisions
    children = tables.children
    pay = tables.pay
    movers = [tables.histories[d][-1] for d in decisions]
    option_counts = [len(children[d]) for d in decisions]
    choice_of_hist = {d: k for k, d in enumerate(decisions)}
    for choices in itertools.product(*(range(c) for c in option_counts)):
        play: list[int] = [0] * n_hist
        for h in range(n_hist - 1, -1, -1):
            kids = children[h]
            if kids is None:
                play[h] = tables.terminal_pid[h]
            else:
                play[h] = play[kids[choices[choice_of_hist[h]]]]
        ok = True
        for k, d in enumerate(decisions):
            mover = movers[k]
            current = pay[play[d]][mover]
            floor = current if tol == 0 else current - tol
            kids = children[d]
            chosen = choices[k]
            for alt in range(len(kids)):
                if alt == chosen:
                    continue
                if pay[play[kids[alt]]][mover] < floor:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            yield tables, choices, play


def spe_bruteforce(
    dag: Dag,
    losses: Mapping[Edge, Num],
    rule: Rule,
    profile_cap: int = 1_000_000,
) -> set[Path]:
    """Definitional oracle: enumerate pure profiles, keep those with no
    profitable one-shot deviation at any history, return their outcomes."""
    outcomes: set[Path] = set()
    for tables, _choices, play in _spe_profiles(dag, losses, rule, profile_cap):
        outcomes.add(Path(tables.paths[play[0]]))
    return outcomes


@dataclass(frozen=True)
class RobustnessResult:
    robust: bool
    witness: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.robust


def check_robust_efficiency(
    dag: Dag,
    losses: Mapping[Edge, Num],
    rule: Rule,
    profile_cap: int = 1_000_000,
) -> RobustnessResult:
    """True iff every SPE profile plays a cheapest continuation at every
    history, including histories off the realized path.

    The witness names the first SPE profile and history where the chosen
    edge is not on a cheapest continuation.
    """
    cont = continuation_costs(dag, losses)
    tol = _tolerance(losses)
    for tables, choices, _play in _spe_profiles(dag, losses, rule, profile_cap):
        for k, d in enumerate(tables.decisions):
            hist = tables.histories[d]
            mover = hist[-1]
            chosen = dag.succ[mover][choices[k]]
            step = losses[(mover, chosen)] + cont[chosen]
            limit = _upper(cont[mover], tol)
            if step > limit:
                optimal = [
                    dag.labels[j]
                    for j in dag.succ[mover]
                    if losses[(mover, j)] + cont[j] <= limit
                ]
                profile = {
                    "->".join(dag.labels[x] for x in tables.histories[dd]): dag.labels[
                        dag.succ[tables.histories[dd][-1]][choices[kk]]
                    ]
                    for kk, dd in enumerate(tables.decisions)
                }
                witness = {
                    "history": [dag.labels[x] for x in hist],
                    "chosen": dag.labels[chosen],
                    "optimal": optimal,
                    "profile": profile,
                }
                return RobustnessResult(False, witness)
    return RobustnessResult(True)
