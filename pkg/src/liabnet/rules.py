"""Liability rules: who pays how much when a cancellation path is realized.

A rule maps (path, losses) to a balanced, non-negative payment vector over
all agents. The central family is fixed-weight: agent i always pays
w_i * total loss of the realized path. Several named benchmark rules are
included, plus the loss-extension constructor that completes a loss
function off a given path so that every path becomes efficient.

Rule-spec string grammar::

    fixed:wstar | fixed:equal | fixed:file=<path.json>
    | local | phi1 | phi2 | phi3 | phi5 | punish-first

phi1 assigns everything to the source; phi2 weights agents by their
largest outgoing loss (offset so weights stay positive and scale with the
losses); phi3 gives every on-path agent an equal share of 1/max-path-length
and splits the remainder off-path; phi5 shrinks the source's weight as the
total loss grows; punish-first splits equally on efficient paths and
otherwise charges everything to the first agent whose choice foreclosed
efficiency; local charges each on-path agent exactly the edge they cancel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .graph import (
    Dag,
    Edge,
    GraphError,
    Num,
    Path,
    check_losses,
    continuation_costs,
    path_loss,
)
from .weights import WeightVector, wstar_dp

# solver interaction modes, see game.spe_outcomes
MODE_TOTALS = "totals"
MODE_OWN_EDGE = "own_edge"
MODE_GENERAL = "general"


class RuleSpecError(Exception):
    """Raised on malformed rule-spec strings or parameters."""


@dataclass(frozen=True)
class LiabilityVector:
    """Per-agent payments for one realized path; balanced by construction."""

    values: tuple[Num, ...]

    def __getitem__(self, i: int) -> Num:
        return self.values[i]

    @property
    def total(self) -> Num:
        return sum(self.values)

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.values)

    def as_dict(self, dag: Dag) -> dict[str, float]:
        return {dag.labels[i]: float(x) for i, x in enumerate(self.values)}


@dataclass(frozen=True)
class RuleSpec:
    """Parsed rule selector; round-trips with the string grammar."""

    kind: str
    weight_file: str | None = None
    weights: WeightVector | None = None

    _GRAMMAR = {
        "fixed:wstar": "fixed-wstar",
        "fixed:equal": "fixed-equal",
        "local": "local",
        "phi1": "source-all",
        "phi2": "maxout-weights",
        "phi3": "onpath-alpha",
        "phi5": "sqrt-source",
        "punish-first": "punish-first",
    }

    @classmethod
    def parse(cls, text: str) -> "RuleSpec":
        text = text.strip()
        if text in cls._GRAMMAR:
            return cls(kind=cls._GRAMMAR[text])
        if text.startswith("fixed:file="):
            path = text[len("fixed:file="):]
            if not path:
                raise RuleSpecError("fixed:file= needs a path")
            return cls(kind="fixed-file", weight_file=path)
        raise RuleSpecError(
            f"unknown rule spec {text!r}; expected one of "
            "fixed:wstar, fixed:equal, fixed:file=<path.json>, local, "
            "phi1, phi2, phi3, phi5, punish-first"
        )

    def to_string(self) -> str:
        if self.kind == "fixed-file":
            return f"fixed:file={self.weight_file}"
        if self.kind == "fixed-custom":
            return "fixed:custom"
        for text, kind in self._GRAMMAR.items():
            if kind == self.kind:
                return text
        raise RuleSpecError(f"unknown rule kind {self.kind!r}")


class BoundRule:
    """A rule with the loss function resolved: a pure path evaluator.

    `mode` tells the equilibrium solver how the mover at a node ranks
    outcomes:
      - MODE_TOTALS: by the continuation's total loss, strictly increasing
        wherever cares[node] is True, constant otherwise;
      - MODE_OWN_EDGE: by the loss of the mover's own chosen edge only;
      - MODE_GENERAL: no structure, evaluate full outcome paths.
    """

    mode: str = MODE_GENERAL
    cares: tuple[bool, ...] | None = None

    def vector(self, path: Path) -> tuple[Num, ...]:
        raise NotImplementedError


class Rule:
    """Unbound rule: pairs a graph with rule parameters frozen up front."""

    def __init__(self, dag: Dag, spec_string: str):
        self.dag = dag
        self.spec_string = spec_string

    def bind(self, losses: Mapping[Edge, Num]) -> BoundRule:
        raise NotImplementedError

    def liabilities(self, path: Path, losses: Mapping[Edge, Num]) -> LiabilityVector:
        return apply_rule(self, path, losses)

    def __repr__(self) -> str:
        return f"<Rule {self.spec_string} on {self.dag.n} nodes>"


class _FixedBound(BoundRule):
    mode = MODE_TOTALS

    def __init__(self, weights: Sequence[Num], losses: Mapping[Edge, Num]):
        self.weights = tuple(weights)
        self.cares = tuple(w > 0 for w in self.weights)
        self._losses = losses

    def vector(self, path: Path) -> tuple[Num, ...]:
        total = path_loss(self._losses, path)
        return tuple(w * total for w in self.weights)


class FixedWeightRule(Rule):
    """Pay w_i * total realized loss; weights fixed per graph."""

    def __init__(self, dag: Dag, weights: WeightVector, spec_string: str):
        super().__init__(dag, spec_string)
        weights.check_simplex()
        if len(weights.values) != dag.n:
            raise RuleSpecError("weight vector length does not match graph")
        self.weights = weights

    def bind(self, losses: Mapping[Edge, Num]) -> BoundRule:
        check_losses(self.dag, losses)
        return _FixedBound(self.weights.values, losses)


class _MaxOutBound(BoundRule):
    mode = MODE_TOTALS

    def __init__(self, dag: Dag, losses: Mapping[Edge, Num]):
        self._losses = losses
        scale = max(losses[e] for e in dag.edges)
        if scale == 0:
            # degenerate: all totals are 0, every split is balanced
            nonsinks = [i for i in range(dag.n) if i not in dag.sinks]
            self.weights = tuple(
                Fraction(1, len(nonsinks)) if i not in dag.sinks else Fraction(0)
                for i in range(dag.n)
            )
        else:
            marks = [
                0 if i in dag.sinks
                else scale + max(losses[(i, j)] for j in dag.succ[i])
                for i in range(dag.n)
            ]
            denom = sum(marks)
            if isinstance(denom, (int, Fraction)):
                self.weights = tuple(Fraction(m) / denom for m in marks)
            else:
                self.weights = tuple(m / denom for m in marks)
        self.cares = tuple(w > 0 for w in self.weights)

    def vector(self, path: Path) -> tuple[Num, ...]:
        total = path_loss(self._losses, path)
        return tuple(w * total for w in self.weights)


class MaxOutWeightsRule(Rule):
    """Weights proportional to each agent's largest outgoing loss.

    An offset equal to the overall largest edge loss keeps every non-sink
    weight strictly positive and the weights invariant under rescaling the
    loss function. The weights depend on losses off the realized path by
    design (that is the property this rule is a counterexample for).
    """

    def bind(self, losses: Mapping[Edge, Num]) -> BoundRule:
        check_losses(self.dag, losses)
        return _MaxOutBound(self.dag, losses)


class _OnPathAlphaBound(BoundRule):
    mode = MODE_TOTALS

    def __init__(self, dag: Dag, alpha: Fraction, losses: Mapping[Edge, Num]):
        self._dag = dag
        self._alpha = alpha
        self._losses = losses
        self.cares = tuple(i not in dag.sinks for i in range(dag.n))

    def vector(self, path: Path) -> tuple[Num, ...]:
        total = path_loss(self._losses, path)
        onpath = set(path.nodes)
        k = len(path.nodes)
        rest = self._dag.n - k
        remainder = 1 - k * self._alpha
        if rest == 0:
            assert remainder <= Fraction(1, 10**12), "on-path shares exceed the total"
            off_share = Fraction(0)
        else:
            off_share = remainder / rest
        return tuple(
            (self._alpha if i in onpath else off_share) * total
            for i in range(self._dag.n)
        )


class OnPathAlphaRule(Rule):
    """Every on-path agent pays an equal share alpha = 1/(longest path node
    count) of the total; off-path agents split the remainder equally."""

    def __init__(self, dag: Dag, spec_string: str):
        super().__init__(dag, spec_string)
        longest = [0] * dag.n  # edges from node to a sink
        for i in range(dag.n - 1, -1, -1):
            if dag.succ[i]:
                longest[i] = 1 + max(longest[j] for j in dag.succ[i])
        self.alpha = Fraction(1, longest[dag.source] + 1)

    def bind(self, losses: Mapping[Edge, Num]) -> BoundRule:
        check_losses(self.dag, losses)
        return _OnPathAlphaBound(self.dag, self.alpha, losses)


class _SqrtSourceBound(BoundRule):
    mode = MODE_TOTALS

    def __init__(self, dag: Dag, losses: Mapping[Edge, Num]):
        self._dag = dag
        self._losses = losses
        self.cares = tuple(i not in dag.sinks for i in range(dag.n))

    def vector(self, path: Path) -> tuple[Num, ...]:
        total = float(path_loss(self._losses, path))
        w_source = 1.0 / math.sqrt(total + 1.0)
        other = (1.0 - w_source) * total / (self._dag.n - 1)
        return tuple(
            w_source * total if i == self._dag.source else other
            for i in range(self._dag.n)
        )


class SqrtSourceRule(Rule):
    """Source weight 1/sqrt(total+1), everyone else splits the rest.

    The source's payment still grows with the total, so equilibria stay
    efficient, but the split is not invariant under scaling the losses."""

    def bind(self, losses: Mapping[Edge, Num]) -> BoundRule:
        check_losses(self.dag, losses)
        return _SqrtSourceBound(self.dag, losses)


class _LocalBound(BoundRule):
    mode = MODE_OWN_EDGE

    def __init__(self, dag: Dag, losses: Mapping[Edge, Num]):
        self._dag = dag
        self._losses = losses

    def vector(self, path: Path) -> tuple[Num, ...]:
        values = [0] * self._dag.n
        for (i, j) in path.edges:
            values[i] = self._losses[(i, j)]
        return tuple(values)


class LocalRule(Rule):
    """Each on-path agent pays exactly the loss of the edge they cancel."""

    def bind(self, losses: Mapping[Edge, Num]) -> BoundRule:
        check_losses(self.dag, losses)
        return _LocalBound(self.dag, losses)


class _PunishFirstBound(BoundRule):
    mode = MODE_GENERAL

    def __init__(self, dag: Dag, losses: Mapping[Edge, Num]):
        self._dag = dag
        self._losses = losses
        self._cont = continuation_costs(dag, losses)

    def first_blocked(self, path: Path) -> int | None:
        """First node whose step left only inefficient continuations."""
        for (i, j) in path.edges:
            if self._losses[(i, j)] + self._cont[j] > self._cont[i]:
                return i
        return None

    def vector(self, path: Path) -> tuple[Num, ...]:
        total = path_loss(self._losses, path)
        blamed = self.first_blocked(path)
        n = self._dag.n
        if blamed is None:
            share = Fraction(1, n) * total
            return tuple(share for _ in range(n))
        return tuple(total if i == blamed else 0 for i in range(n))


class PunishFirstRule(Rule):
    """Equal split on efficient paths; otherwise the first agent to choose
    a step that foreclosed efficiency pays the whole loss."""

    def bind(self, losses: Mapping[Edge, Num]) -> BoundRule:
        check_losses(self.dag, losses)
        return _PunishFirstBound(self.dag, losses)


# ---------------------------------------------------------------------------


def make_rule(spec: Union[RuleSpec, str], dag: Dag) -> Rule:
    """Resolve a rule spec against a graph.

    Graph-dependent parameters (canonical weights, the on-path share of
    phi3) are computed once here, so the returned rule is a deterministic
    pure evaluator.
    """
    if isinstance(spec, str):
        spec = RuleSpec.parse(spec)
    kind = spec.kind
    if kind == "fixed-wstar":
        return FixedWeightRule(dag, wstar_dp(dag), "fixed:wstar")
    if kind == "fixed-equal":
        w = WeightVector(tuple(Fraction(1, dag.n) for _ in range(dag.n)))
        return FixedWeightRule(dag, w, "fixed:equal")
    if kind == "fixed-file":
        from .io import load_weights_file

        mapping = load_weights_file(spec.weight_file, dag)
        w = WeightVector.from_mapping(dag, mapping)
        return FixedWeightRule(dag, w, spec.to_string())
    if kind == "fixed-custom":
        if spec.weights is None:
            raise RuleSpecError("fixed-custom needs an explicit weight vector")
        return FixedWeightRule(dag, spec.weights, "fixed:custom")
    if kind == "source-all":
        w = WeightVector(
            tuple(Fraction(1) if i == dag.source else Fraction(0) for i in range(dag.n))
        )
        return FixedWeightRule(dag, w, "phi1")
    if kind == "maxout-weights":
        return MaxOutWeightsRule(dag, "phi2")
    if kind == "onpath-alpha":
        return OnPathAlphaRule(dag, "phi3")
    if kind == "sqrt-source":
        return SqrtSourceRule(dag, "phi5")
    if kind == "local":
        return LocalRule(dag, "local")
    if kind == "punish-first":
        return PunishFirstRule(dag, "punish-first")
    raise RuleSpecError(f"unknown rule kind {kind!r}")


def fixed_rule(dag: Dag, weights: WeightVector) -> FixedWeightRule:
    """Fixed-weight rule from an explicit weight vector."""
    return FixedWeightRule(dag, weights, "fixed:custom")


def check_path(dag: Dag, path: Path) -> None:
    nodes = path.nodes
    if len(nodes) < 2 or nodes[0] != dag.source or nodes[-1] not in dag.sinks:
        raise GraphError(f"not a source-to-sink path: {nodes}")
    if len(set(nodes)) != len(nodes):
        raise GraphError("path repeats a node")
    for u, v in path.edges:
        if not dag.has_edge(u, v):
            raise GraphError(
                f"path uses missing edge ({dag.labels[u]!r}, {dag.labels[v]!r})"
            )


def apply_rule(
    rule: Rule, path: Path, losses: Mapping[Edge, Num]
) -> LiabilityVector:
    """Evaluate a rule and enforce balance and non-negativity.

    Raises GraphError when the path is not a source-to-sink path of the
    rule's graph or losses are not total.
    """
    check_path(rule.dag, path)
    bound = rule.bind(losses)
    values = bound.vector(path)
    total = path_loss(losses, path)
    slack = 1e-9 * max(1.0, abs(float(total)))
    assert all(x >= -1e-12 for x in values), f"negative liability from {rule.spec_string}"
    assert abs(float(sum(values) - total)) <= slack, (
        f"unbalanced liabilities from {rule.spec_string}: "
        f"{float(sum(values))} vs {float(total)}"
    )
    return LiabilityVector(values)


def irreducible_extension(
    dag: Dag, path: Path, losses: Mapping[Edge, Num]
) -> dict[Edge, Num]:
    """Extend the losses on `path` to the whole graph so every path ties.

    Builds node potentials: 0 at the source, the prefix cost along the
    path, the full path loss at every sink, and for off-path non-sinks the
    maximum potential among predecessors (in topological order). The loss
    of edge (i, j) becomes potential(j) - potential(i), which reproduces
    `losses` on the path's own edges and makes every source-to-sink path
    cost exactly the path's total.
    """
    check_path(dag, path)
    check_losses(dag, losses)
    total = path_loss(losses, path)
    potential: list[Num | None] = [None] * dag.n
    potential[dag.source] = 0
    acc: Num = 0
    for (i, j) in path.edges:
        acc = acc + losses[(i, j)]
        if j not in dag.sinks:
            potential[j] = acc
    for t in dag.sinks:
        potential[t] = total
    for j in range(dag.n):
        if potential[j] is None:
            potential[j] = max(potential[i] for i in dag.pred[j])
    extended: dict[Edge, Num] = {}
    for (i, j) in dag.edges:
        value = potential[j] - potential[i]
        if value < -1e-12:
            raise GraphError(
                f"extension produced negative loss {value} on edge "
                f"({dag.labels[i]!r}, {dag.labels[j]!r})"
            )
        extended[(i, j)] = max(0, value)
    return extended
