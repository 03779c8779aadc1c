"""Randomized falsification checkers for rule axioms and derived properties.

Each checker runs seeded trials and reports the first counterexample, if
any. A pass means no counterexample was found in the requested number of
trials, not a proof. Per-trial RNG streams are derived from the master
seed by counter, so reports replay byte-for-byte.

Axioms:
  EI   equilibrium outcomes coincide with the efficient path set
  RLD  liabilities depend only on losses along the realized path
  PCP  no unilateral deviation from an efficient equilibrium strictly
       lowers any agent pair's joint liability
  SI   scaling all losses scales all liabilities by the same factor

Properties:
  DOWNSTREAM_MONO     a mover with positive stake prefers the branch with
                      the cheaper efficient continuation (iff both ways)
  EFF_PATH_INV        all efficient paths yield identical liabilities
  REDISTRIBUTION_INV  permuting losses along the realized path changes
                      nothing
  PATH_INDEP          equal-total paths under one loss function tie
  TOTAL_LOSS_DEP      equal totals across instances yield equal vectors
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Union

from .game import spe_outcomes, spe_solve
from .generators import random_dag, random_losses
from .graph import (
    Dag,
    Edge,
    Num,
    Path,
    build_dag,
    continuation_costs,
    efficient_paths,
    enumerate_paths,
    path_loss,
    validate,
)
from .rules import (
    FixedWeightRule,
    OnPathAlphaRule,
    Rule,
    RuleSpec,
    SqrtSourceRule,
    make_rule,
)

AXIOMS = ("EI", "RLD", "PCP", "SI")
PROPERTIES = (
    "DOWNSTREAM_MONO",
    "EFF_PATH_INV",
    "REDISTRIBUTION_INV",
    "PATH_INDEP",
    "TOTAL_LOSS_DEP",
)

RuleLike = Union[str, RuleSpec, Rule, Callable[[Dag, random.Random], Rule]]


class AxiomError(Exception):
    pass


@dataclass
class CheckReport:
    id: str
    rule: str
    trials: int
    passes: int
    seed: int
    applicable: bool = True
    counterexample: Optional[dict] = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.applicable and self.counterexample is None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "rule": self.rule,
            "trials": self.trials,
            "passes": self.passes,
            "seed": self.seed,
            "applicable": self.applicable,
            "passed": self.passed,
            "counterexample": self.counterexample,
            "detail": self.detail,
        }


# ---------------------------------------------------------------------------
# shared plumbing


def _trial_rng(seed: int, trial: int) -> random.Random:
    return random.Random(f"{seed}:{trial}")


def _as_factory(rule: RuleLike):
    if isinstance(rule, Rule):
        fixed = rule

        def factory(dag: Dag, rng: random.Random) -> Rule:
            if dag is not fixed.dag:
                raise AxiomError("a bound Rule can only be checked on its own graph")
            return fixed

        return factory
    if isinstance(rule, (str, RuleSpec)):
        spec = RuleSpec.parse(rule) if isinstance(rule, str) else rule
        return lambda dag, rng: make_rule(spec, dag)
    if callable(rule):
        return rule
    raise AxiomError(f"cannot interpret rule {rule!r}")


def _num_repr(x: Num):
    if isinstance(x, Fraction):
        return str(x)
    return x


def _graph_dict(dag: Dag, losses: Mapping[Edge, Num]) -> dict:
    return {
        "nodes": list(dag.labels),
        "edges": [
            {"from": dag.labels[i], "to": dag.labels[j], "loss": _num_repr(losses[(i, j)])}
            for (i, j) in dag.edges
        ],
    }


def _path_labels(dag: Dag, nodes) -> list[str]:
    return [dag.labels[i] for i in nodes]


def _vec_dict(dag: Dag, vec) -> dict:
    return {dag.labels[i]: _num_repr(v) for i, v in enumerate(vec)}


def _vec_close(a, b) -> bool:
    inexact = any(
        isinstance(v, float) and not v.is_integer() for v in (*a, *b)
    )
    if not inexact:
        return all(x == y for x, y in zip(a, b))
    return all(abs(float(x) - float(y)) <= 1e-9 for x, y in zip(a, b))


def _lt(a: Num, b: Num, tol: float) -> bool:
    """Strictly-less with tolerance; exact when tol is 0."""
    if tol == 0:
        return a < b
    return float(a) < float(b) - tol


def _pay_table(rule: Rule, losses: Mapping[Edge, Num]):
    bound = rule.bind(losses)
    cache: dict[tuple[int, ...], tuple[Num, ...]] = {}

    def pay(nodes: tuple[int, ...]) -> tuple[Num, ...]:
        vec = cache.get(nodes)
        if vec is None:
            vec = tuple(bound.vector(Path(nodes)))
            cache[nodes] = vec
        return vec

    return pay


def _draw_instance(rng, dag, losses):
    g = dag if dag is not None else random_dag(rng)
    lo = losses if losses is not None else random_losses(rng, g)
    return g, lo


def _tol_for(losses: Mapping[Edge, Num]) -> float:
    from .graph import exact_valued

    return 0.0 if exact_valued(losses) else 1e-9


# ---------------------------------------------------------------------------
# axiom trial bodies; each returns None on pass or a counterexample dict


def _trial_ei(rng, dag, losses, rule):
    spe = {p.nodes for p in spe_outcomes(dag, losses, rule)}
    eff = efficient_paths(dag, losses).path_set()
    if spe == eff:
        return None
    return {
        "graph": _graph_dict(dag, losses),
        "spe": sorted(_path_labels(dag, p) for p in spe),
        "efficient": sorted(_path_labels(dag, p) for p in eff),
        "spe_totals": sorted(
            float(path_loss(losses, Path(p))) for p in spe
        ),
        "efficient_total": float(efficient_paths(dag, losses).min_cost),
    }


def _trial_rld(rng, dag, losses, rule):
    paths = enumerate_paths(dag)
    path = rng.choice(paths)
    onpath = set(path.edges)
    second = {
        e: (v if e in onpath else rng.randint(0, 9)) for e, v in losses.items()
    }
    base = rule.liabilities(path, losses).values
    other = rule.liabilities(path, second).values
    if _vec_close(base, other):
        return None
    return {
        "graph": _graph_dict(dag, losses),
        "path": _path_labels(dag, path.nodes),
        "off_path_losses": _graph_dict(dag, second)["edges"],
        "liabilities": _vec_dict(dag, base),
        "liabilities_after_off_path_change": _vec_dict(dag, other),
    }


def _trial_si(rng, dag, losses, rule):
    paths = enumerate_paths(dag)
    path = rng.choice(paths)
    alpha = rng.choice([Fraction(1, 2), 2, 10])
    scaled = {e: alpha * v for e, v in losses.items()}
    base = rule.liabilities(path, losses).values
    got = rule.liabilities(path, scaled).values
    want = tuple(alpha * x for x in base)
    if _vec_close(got, want):
        return None
    return {
        "graph": _graph_dict(dag, losses),
        "path": _path_labels(dag, path.nodes),
        "alpha": _num_repr(alpha),
        "scaled_liabilities": _vec_dict(dag, got),
        "alpha_times_base": _vec_dict(dag, want),
    }


def _trial_pcp(rng, dag, losses, rule):
    sol = spe_solve(dag, losses, rule)
    spe = sol.outcomes()
    eff = efficient_paths(dag, losses).path_set()
    pay = _pay_table(rule, losses)
    tol = _tol_for(losses)
    equilibria = sorted((p.nodes for p in spe if p.nodes in eff))
    for p_nodes in equilibria:
        base = pay(p_nodes)
        for pos in range(len(p_nodes) - 1):
            i = p_nodes[pos]
            if len(dag.succ[i]) < 2:
                continue
            prefix = p_nodes[: pos + 1]
            for alt in dag.succ[i]:
                if alt == p_nodes[pos + 1]:
                    continue
                for dev in sorted(c.nodes for c in sol.continuations(prefix + (alt,))):
                    moved = pay(dev)
                    # only continuations the mover tolerates can arise in
                    # an equilibrium that actually realizes p
                    if _lt(moved[i], base[i], tol):
                        continue
                    for j in range(dag.n):
                        if j == i:
                            continue
                        if _lt(moved[i] + moved[j], base[i] + base[j], tol):
                            return {
                                "graph": _graph_dict(dag, losses),
                                "equilibrium_path": _path_labels(dag, p_nodes),
                                "deviator": dag.labels[i],
                                "partner": dag.labels[j],
                                "deviation_path": _path_labels(dag, dev),
                                "pair_sum_before": _num_repr(base[i] + base[j]),
                                "pair_sum_after": _num_repr(moved[i] + moved[j]),
                            }
    return None


_AXIOM_TRIALS = {
    "EI": _trial_ei,
    "RLD": _trial_rld,
    "SI": _trial_si,
    "PCP": _trial_pcp,
}


def check_axiom(
    axiom_id: str,
    rule: RuleLike,
    dag: Optional[Dag] = None,
    trials: int = 100,
    seed: int = 0,
    losses: Optional[Mapping[Edge, Num]] = None,
) -> CheckReport:
    """Search for a counterexample to an axiom over seeded random trials.

    With `dag` given, only losses are redrawn each trial (or held fixed if
    `losses` is also given); otherwise each trial draws a fresh graph.
    Stops at the first counterexample.
    """
    if axiom_id not in AXIOMS:
        raise AxiomError(f"unknown axiom {axiom_id!r}; expected one of {AXIOMS}")
    if losses is not None and dag is None:
        raise AxiomError("fixed losses require a fixed graph")
    factory = _as_factory(rule)
    body = _AXIOM_TRIALS[axiom_id]
    rule_name = None
    passes = 0
    ran = 0
    counterexample = None
    for t in range(trials):
        rng = _trial_rng(seed, t)
        g, lo = _draw_instance(rng, dag, losses)
        r = factory(g, rng)
        if rule_name is None:
            rule_name = r.spec_string
        ran += 1
        cex = body(rng, g, lo, r)
        if cex is None:
            passes += 1
        else:
            cex["trial"] = t
            counterexample = cex
            break
    return CheckReport(
        id=axiom_id,
        rule=rule_name or "",
        trials=ran,
        passes=passes,
        seed=seed,
        counterexample=counterexample,
    )


# ---------------------------------------------------------------------------
# derived structural properties


def _mono_eligible(rule: Rule) -> Optional[list[int]]:
    """Movers where the strict preference biconditional is claimed.

    Only rules whose payments depend on losses solely through the realized
    total and strictly increase in it qualify; for the fixed family that
    means nodes with positive weight."""
    dag = rule.dag
    if isinstance(rule, FixedWeightRule):
        return [i for i in dag.deciders() if rule.weights.values[i] > 0]
    if isinstance(rule, (OnPathAlphaRule, SqrtSourceRule)):
        return list(dag.deciders())
    return None


def _random_history(rng, dag: Dag, target: int) -> tuple[int, ...]:
    rev = [target]
    x = target
    while x != dag.source:
        x = rng.choice(dag.pred[x])
        rev.append(x)
    return tuple(reversed(rev))


def _efficient_suffix(dag: Dag, losses, cont, start: int) -> tuple[int, ...]:
    # cheapest continuation, smallest node index on ties
    nodes = [start]
    x = start
    while dag.succ[x]:
        x = min(y for y in dag.succ[x] if losses[(x, y)] + cont[y] == cont[x])
        nodes.append(x)
    return tuple(nodes)


def _trial_downstream_mono(rng, dag, losses, rule, eligible):
    pay = _pay_table(rule, losses)
    cont = continuation_costs(dag, losses)
    i = rng.choice(eligible)
    history = _random_history(rng, dag, i)
    j, k = rng.sample(dag.succ[i], 2)
    path_j = history + _efficient_suffix(dag, losses, cont, j)
    path_k = history + _efficient_suffix(dag, losses, cont, k)
    lhs = losses[(i, j)] + cont[j] < losses[(i, k)] + cont[k]
    rhs = pay(path_j)[i] < pay(path_k)[i]
    lhs_rev = losses[(i, k)] + cont[k] < losses[(i, j)] + cont[j]
    rhs_rev = pay(path_k)[i] < pay(path_j)[i]
    if lhs == rhs and lhs_rev == rhs_rev:
        return None
    return {
        "graph": _graph_dict(dag, losses),
        "mover": dag.labels[i],
        "history": _path_labels(dag, history),
        "branches": [dag.labels[j], dag.labels[k]],
        "continuation_costs": [
            _num_repr(losses[(i, j)] + cont[j]),
            _num_repr(losses[(i, k)] + cont[k]),
        ],
        "mover_liabilities": [_num_repr(pay(path_j)[i]), _num_repr(pay(path_k)[i])],
    }


def _trial_eff_path_inv(rng, dag_opt, losses_opt, factory, state):
    for _ in range(60):
        g, lo = _draw_instance(rng, dag_opt, losses_opt)
        eff = efficient_paths(g, lo).paths
        if len(eff) >= 2:
            rule = factory(g, rng)
            pay = _pay_table(rule, lo)
            p1, p2 = rng.sample(list(eff), 2)
            if _vec_close(pay(p1.nodes), pay(p2.nodes)):
                return None
            return {
                "graph": _graph_dict(g, lo),
                "paths": [_path_labels(g, p1.nodes), _path_labels(g, p2.nodes)],
                "liabilities": [
                    _vec_dict(g, pay(p1.nodes)),
                    _vec_dict(g, pay(p2.nodes)),
                ],
            }
        if dag_opt is not None and losses_opt is not None:
            break
    state["vacuous"] += 1
    return None


def _trial_redistribution_inv(rng, dag, losses, rule):
    paths = enumerate_paths(dag)
    path = rng.choice(paths)
    vals = [losses[e] for e in path.edges]
    shuffled = vals[:]
    for _ in range(10):
        rng.shuffle(shuffled)
        if shuffled != vals:
            break
    second = dict(losses)
    for e, v in zip(path.edges, shuffled):
        second[e] = v
    base = rule.liabilities(path, losses).values
    other = rule.liabilities(path, second).values
    if _vec_close(base, other):
        return None
    return {
        "graph": _graph_dict(dag, losses),
        "path": _path_labels(dag, path.nodes),
        "losses_along_path": [_num_repr(v) for v in vals],
        "permuted": [_num_repr(v) for v in shuffled],
        "liabilities": _vec_dict(dag, base),
        "liabilities_after_permutation": _vec_dict(dag, other),
    }


def _trial_path_indep(rng, dag_opt, losses_opt, factory, state):
    for _ in range(60):
        g, lo = _draw_instance(rng, dag_opt, losses_opt)
        groups: dict = {}
        for p in enumerate_paths(g):
            groups.setdefault(path_loss(lo, p), []).append(p)
        tied = [ps for ps in groups.values() if len(ps) >= 2]
        if tied:
            rule = factory(g, rng)
            pay = _pay_table(rule, lo)
            p1, p2 = rng.sample(rng.choice(tied), 2)
            if _vec_close(pay(p1.nodes), pay(p2.nodes)):
                return None
            return {
                "graph": _graph_dict(g, lo),
                "equal_total_paths": [
                    _path_labels(g, p1.nodes),
                    _path_labels(g, p2.nodes),
                ],
                "total": _num_repr(path_loss(lo, p1)),
                "liabilities": [
                    _vec_dict(g, pay(p1.nodes)),
                    _vec_dict(g, pay(p2.nodes)),
                ],
            }
        if dag_opt is not None and losses_opt is not None:
            break
    state["vacuous"] += 1
    return None


def _trial_total_loss_dep(rng, dag_opt, losses_opt, factory, state):
    for _ in range(60):
        g, lo = _draw_instance(rng, dag_opt, losses_opt)
        paths = enumerate_paths(g)
        p1 = rng.choice(paths)
        target = path_loss(lo, p1)
        second = random_losses(rng, g)
        matches = [p for p in paths if path_loss(second, p) == target]
        if not matches:
            continue
        others = [p for p in matches if p.nodes != p1.nodes]
        p2 = rng.choice(others) if others else matches[0]
        rule = factory(g, rng)
        base = rule.liabilities(p1, lo).values
        other = rule.liabilities(p2, second).values
        if _vec_close(base, other):
            return None
        return {
            "graph": _graph_dict(g, lo),
            "path": _path_labels(g, p1.nodes),
            "second_losses": _graph_dict(g, second)["edges"],
            "second_path": _path_labels(g, p2.nodes),
            "total": _num_repr(target),
            "liabilities": [_vec_dict(g, base), _vec_dict(g, other)],
        }
    state["vacuous"] += 1
    return None


def check_property(
    property_id: str,
    rule: RuleLike,
    dag: Optional[Dag] = None,
    trials: int = 100,
    seed: int = 0,
    losses: Optional[Mapping[Edge, Num]] = None,
) -> CheckReport:
    """Check a structural property on seeded random instances.

    DOWNSTREAM_MONO applies only to rules whose payments strictly increase
    in the realized total at the sampled mover; other rules report
    applicable=False. Trials whose premise cannot be instantiated (for
    example, no pair of efficient paths exists) count as vacuous passes
    and are tallied in the detail field.
    """
    if property_id not in PROPERTIES:
        raise AxiomError(
            f"unknown property {property_id!r}; expected one of {PROPERTIES}"
        )
    if losses is not None and dag is None:
        raise AxiomError("fixed losses require a fixed graph")
    factory = _as_factory(rule)
    rule_name = None
    passes = 0
    ran = 0
    counterexample = None
    state = {"vacuous": 0}

    if property_id == "DOWNSTREAM_MONO":
        probe_rng = _trial_rng(seed, 0)
        probe = factory(dag if dag is not None else random_dag(probe_rng), probe_rng)
        elig = _mono_eligible(probe)
        reason = None
        if elig is None:
            reason = "mover payments are not strictly increasing in the total"
        elif dag is not None and not elig:
            reason = "no mover with a positive stake and several options in this graph"
        if reason is not None:
            return CheckReport(
                id=property_id,
                rule=probe.spec_string,
                trials=0,
                passes=0,
                seed=seed,
                applicable=False,
                detail={"reason": reason},
            )

    for t in range(trials):
        rng = _trial_rng(seed, t)
        cex = None
        if property_id == "DOWNSTREAM_MONO":
            g = lo = r = eligible = None
            for _ in range(60):
                g, lo = _draw_instance(rng, dag, losses)
                r = factory(g, rng)
                eligible = _mono_eligible(r)
                if eligible:
                    break
                if dag is not None:
                    eligible = None
                    break
            if not eligible:
                state["vacuous"] += 1
            else:
                cex = _trial_downstream_mono(rng, g, lo, r, eligible)
            if rule_name is None and r is not None:
                rule_name = r.spec_string
        elif property_id == "EFF_PATH_INV":
            cex = _trial_eff_path_inv(rng, dag, losses, factory, state)
        elif property_id == "REDISTRIBUTION_INV":
            g, lo = _draw_instance(rng, dag, losses)
            r = factory(g, rng)
            if rule_name is None:
                rule_name = r.spec_string
            cex = _trial_redistribution_inv(rng, g, lo, r)
        elif property_id == "PATH_INDEP":
            cex = _trial_path_indep(rng, dag, losses, factory, state)
        else:
            cex = _trial_total_loss_dep(rng, dag, losses, factory, state)
        ran += 1
        if cex is None:
            passes += 1
        else:
            cex["trial"] = t
            counterexample = cex
            break

    if rule_name is None:
        probe_rng = _trial_rng(seed, 0)
        rule_name = factory(
            dag if dag is not None else random_dag(probe_rng), probe_rng
        ).spec_string
    return CheckReport(
        id=property_id,
        rule=rule_name,
        trials=ran,
        passes=passes,
        seed=seed,
        counterexample=counterexample,
        detail={"vacuous": state["vacuous"]} if state["vacuous"] else {},
    )


# ---------------------------------------------------------------------------
# the no-rule-works scenario


def impossibility_scenario() -> CheckReport:
    """Replay the two-loss-function scenario showing no single liability
    rule that ignores off-path losses can always implement efficiency.

    On the bypass graph (s->t, s->i, i->j, i->t, j->t) the local rule
    picks only efficient paths under the base losses, but after zeroing
    the one loss on edge (i, t) - off every path the base play realizes -
    its equilibria include an inefficient path. The canonical fixed-weight
    rule matches the efficient set exactly under both loss functions.
    """
    dag = build_dag(
        ["s", "i", "j", "t"],
        [("s", "t"), ("s", "i"), ("i", "j"), ("i", "t"), ("j", "t")],
    )
    s, i, j, t = (dag.index(x) for x in "sijt")
    base = {(s, t): 1, (s, i): 0, (i, j): 0, (i, t): 1, (j, t): 1}
    prime = dict(base)
    prime[(i, t)] = 0

    report = validate(
        list(dag.labels),
        [(dag.labels[a], dag.labels[b]) for a, b in dag.edges],
    )
    local = make_rule("local", dag)
    wstar = make_rule("fixed:wstar", dag)

    def spe_labels(losses, rule):
        return sorted(_path_labels(dag, p.nodes) for p in spe_outcomes(dag, losses, rule))

    def eff_labels(losses):
        return sorted(_path_labels(dag, p) for p in efficient_paths(dag, losses).path_set())

    base_spe, base_eff = spe_labels(base, local), eff_labels(base)
    prime_spe, prime_eff = spe_labels(prime, local), eff_labels(prime)
    base_bad = [p for p in base_spe if p not in base_eff]
    prime_bad = [p for p in prime_spe if p not in prime_eff]
    wstar_base_ok = spe_labels(base, wstar) == base_eff
    wstar_prime_ok = spe_labels(prime, wstar) == prime_eff

    ok = (
        report.valid
        and not report.warnings
        and not base_bad
        and bool(prime_bad)
        and prime_eff == [["s", "i", "t"]]
        and wstar_base_ok
        and wstar_prime_ok
    )
    detail = {
        "graph": _graph_dict(dag, base),
        "changed_edge": "i->t",
        "base": {"efficient": base_eff, "local_spe": base_spe},
        "prime": {"efficient": prime_eff, "local_spe": prime_spe},
        "local_inefficient_spe_at_prime": prime_bad,
        "wstar_matches_efficient": {"base": wstar_base_ok, "prime": wstar_prime_ok},
    }
    counterexample = None if ok else {"detail": "scenario did not reproduce"}
    return CheckReport(
        id="IMPOSSIBILITY",
        rule="local vs fixed:wstar",
        trials=1,
        passes=1 if ok else 0,
        seed=0,
        counterexample=counterexample,
        detail=detail,
    )
