"""Command-line entry point.

Subcommands: validate, paths, weights, efficient, liability, spe, check,
simulate. All output is JSON on stdout (sorted keys; `--pretty` for
indentation). Exit codes: 0 success, 1 a check failed or a counterexample
was found, 2 usage errors, malformed inputs, cap exceedances, or a check
that does not apply to the given rule.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import Optional, Sequence

from .axioms import (
    AXIOMS,
    PROPERTIES,
    AxiomError,
    check_axiom,
    check_property,
    impossibility_scenario,
)
from .game import GameError, spe_outcomes
from .graph import (
    Dag,
    GraphError,
    Path,
    count_paths,
    efficient_paths,
    enumerate_paths,
    validate,
)
from .io import (
    FormatError,
    dump_json,
    load_graph_file,
    load_losses_file,
    load_raw_graph_file,
)
from .rules import RuleSpecError, apply_rule, make_rule
from .sim import SimConfig, SimError, run_simulation, summary_dict
from .weights import WeightsError, shapley_bruteforce, wstar_dp, wstar_enumerate

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class CliError(Exception):
    """Usage-level failure; message goes to stderr, exit code 2."""


def _emit(obj, pretty: bool) -> None:
    print(dump_json(obj, pretty=pretty))


def _label_path(dag: Dag, path: Path) -> list[str]:
    return list(path.labels(dag))


def _sorted_paths(dag: Dag, paths) -> list[list[str]]:
    return [_label_path(dag, p) for p in sorted(paths, key=lambda p: p.nodes)]


def _full_losses(dag: Dag, embedded, losses_path: Optional[str]):
    losses = dict(embedded)
    if losses_path:
        losses.update(load_losses_file(losses_path, dag))
    missing = [e for e in dag.edges if e not in losses]
    if missing:
        u, v = missing[0]
        raise CliError(
            f"loss function is not total: no loss for edge "
            f"{dag.labels[u]}->{dag.labels[v]} (supply --losses <file>)"
        )
    return losses


def _parse_path(dag: Dag, text: str) -> Path:
    labels = [x.strip() for x in text.split(",") if x.strip()]
    if not labels:
        raise CliError("--path must list node labels separated by commas")
    index = {lab: i for i, lab in enumerate(dag.labels)}
    try:
        nodes = tuple(index[lab] for lab in labels)
    except KeyError as exc:
        raise CliError(f"unknown node label {exc.args[0]!r} in --path") from None
    return Path(nodes)


def _vec_to_labels(dag: Dag, vec) -> dict:
    return {dag.labels[i]: float(vec[i]) for i in range(dag.n)}


# ---------------------------------------------------------------------------
# command handlers


def _cmd_validate(args) -> int:
    nodes, edges, source = load_raw_graph_file(args.graph)
    report = validate(nodes, edges, source=source)
    _emit(report.to_dict(), args.pretty)
    # a graph that fails validation is unusable input, same class as a
    # malformed file; warnings alone do not fail
    return EXIT_OK if report.valid else EXIT_USAGE


def _cmd_paths(args) -> int:
    dag, _ = load_graph_file(args.graph)
    total = count_paths(dag)
    paths = enumerate_paths(dag, cap=args.cap_paths)
    _emit(
        {"count": str(total), "paths": [_label_path(dag, p) for p in paths]},
        args.pretty,
    )
    return EXIT_OK


def _cmd_weights(args) -> int:
    dag, _ = load_graph_file(args.graph)
    t0 = time.perf_counter()
    if args.method == "dp":
        wv = wstar_dp(dag)
    elif args.method == "enumerate":
        wv = wstar_enumerate(dag, cap=args.cap_paths)
    else:
        wv = shapley_bruteforce(dag)
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    out = {
        "weights": {dag.labels[i]: float(w) for i, w in enumerate(wv.values)},
        "metadata": {
            "method": args.method,
            "path_count": str(count_paths(dag)),
            "runtime_ms": round(runtime_ms, 3),
        },
    }
    _emit(out, args.pretty)
    return EXIT_OK


def _cmd_efficient(args) -> int:
    dag, embedded = load_graph_file(args.graph)
    losses = _full_losses(dag, embedded, args.losses)
    res = efficient_paths(dag, losses, tie_tolerance=args.tol)
    out = {
        "min_cost": float(res.min_cost),
        "paths": _sorted_paths(dag, res.paths),
        "continuation": {dag.labels[i]: float(c) for i, c in enumerate(res.continuation)},
    }
    _emit(out, args.pretty)
    return EXIT_OK


def _cmd_liability(args) -> int:
    dag, embedded = load_graph_file(args.graph)
    losses = _full_losses(dag, embedded, args.losses)
    rule = make_rule(args.rule, dag)
    path = _parse_path(dag, args.path)
    vec = apply_rule(rule, path, losses)
    out = {
        "rule": rule.spec_string,
        "path": _label_path(dag, path),
        "total": float(vec.total),
        "liabilities": _vec_to_labels(dag, vec),
    }
    _emit(out, args.pretty)
    return EXIT_OK


def _cmd_spe(args) -> int:
    dag, embedded = load_graph_file(args.graph)
    losses = _full_losses(dag, embedded, args.losses)
    rule = make_rule(args.rule, dag)
    outcomes = spe_outcomes(dag, losses, rule)
    eff = efficient_paths(dag, losses, tie_tolerance=args.tol)
    coincide = {p.nodes for p in outcomes} == {p.nodes for p in eff.paths}
    liab = {}
    for p in sorted(outcomes, key=lambda p: p.nodes):
        key = "->".join(_label_path(dag, p))
        liab[key] = _vec_to_labels(dag, apply_rule(rule, p, losses))
    out = {
        "rule": rule.spec_string,
        "outcomes": _sorted_paths(dag, outcomes),
        "efficient": _sorted_paths(dag, eff.paths),
        "min_cost": float(eff.min_cost),
        "coincide": coincide,
        "liabilities": liab,
    }
    _emit(out, args.pretty)
    return EXIT_OK


def _cmd_check(args) -> int:
    chosen = [x for x in (args.axiom, args.property, args.scenario) if x]
    if len(chosen) != 1:
        raise CliError("pick exactly one of --axiom, --property, --scenario")
    dag = losses = None
    if args.graph:
        dag, embedded = load_graph_file(args.graph)
        if args.losses:
            losses = _full_losses(dag, embedded, args.losses)
        elif embedded and all(e in embedded for e in dag.edges):
            losses = embedded
    if args.scenario:
        if args.scenario != "impossibility":
            raise CliError(f"unknown scenario {args.scenario!r} (try: impossibility)")
        report = impossibility_scenario()
    else:
        if not args.rule:
            raise CliError("--rule is required for axiom and property checks")
        if args.axiom:
            report = check_axiom(
                args.axiom, args.rule, dag=dag, trials=args.trials,
                seed=args.seed, losses=losses,
            )
        else:
            report = check_property(
                args.property, args.rule, dag=dag, trials=args.trials,
                seed=args.seed, losses=losses,
            )
    _emit(report.to_dict(), args.pretty)
    if not report.applicable:
        return EXIT_USAGE
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_simulate(args) -> int:
    if args.config:
        config = SimConfig.from_file(args.config)
    else:
        config = SimConfig()
    if args.seed is not None:
        spec = config.graph
        graph = type(spec)(
            sizes=spec.sizes, p_next=spec.p_next, p_skip=spec.p_skip, seed=args.seed
        )
        config = SimConfig(
            graph=graph,
            draws=config.draws,
            loss_low=config.loss_low,
            loss_high=config.loss_high,
            rules=config.rules,
            seed=args.seed,
        )
    stats = run_simulation(config, workers=args.workers, out_dir=args.out)
    _emit(summary_dict(stats, config), args.pretty)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liabnet",
        description=(
            "Cancellation cascades on acyclic networks: validation, path and "
            "weight computation, equilibrium solving, rule audits, simulation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_: str, graph: bool = True, graph_required: bool = True):
        p = sub.add_parser(name, help=help_)
        if graph:
            if graph_required:
                p.add_argument("graph", help="graph JSON file")
            else:
                p.add_argument("graph", nargs="?", default=None, help="graph JSON file")
        p.add_argument("--pretty", action="store_true", help="indent JSON output")
        return p

    add("validate", "structural checks on a graph file")

    p = add("paths", "enumerate all source-to-sink paths")
    p.add_argument("--cap-paths", type=int, default=10_000,
                   help="refuse to enumerate beyond this many paths")

    p = add("weights", "canonical fixed weights of a graph")
    p.add_argument("--method", choices=("dp", "enumerate", "shapley"), default="dp")
    p.add_argument("--cap-paths", type=int, default=100_000,
                   help="path cap for --method enumerate")

    p = add("efficient", "minimum-cost paths and continuation costs")
    p.add_argument("--losses", default=None, help="JSON file mapping 'from->to' to loss")
    p.add_argument("--tol", type=float, default=None,
                   help="tie tolerance (default: exact for integer losses, 1e-9 otherwise)")

    p = add("liability", "apply a rule to one realized path")
    p.add_argument("--rule", required=True, help="rule spec, e.g. fixed:wstar or local")
    p.add_argument("--path", required=True, help="comma-separated node labels")
    p.add_argument("--losses", default=None)

    p = add("spe", "exact equilibrium outcome set of the induced game")
    p.add_argument("--rule", required=True)
    p.add_argument("--losses", default=None)
    p.add_argument("--tol", type=float, default=None)

    p = add("check", "axiom/property/scenario audits", graph_required=False)
    p.add_argument("--axiom", choices=AXIOMS, default=None)
    p.add_argument("--property", choices=PROPERTIES, default=None)
    p.add_argument("--scenario", default=None, help="named scenario: impossibility")
    p.add_argument("--rule", default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--losses", default=None,
                   help="hold this loss function fixed across trials")

    p = sub.add_parser("simulate", help="Monte-Carlo rule comparison on a layered network")
    p.add_argument("config", nargs="?", default=None, help="simulation config JSON")
    p.add_argument("--out", default=None, help="directory for CSV/JSON artifacts")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--pretty", action="store_true")

    return parser


_HANDLERS = {
    "validate": _cmd_validate,
    "paths": _cmd_paths,
    "weights": _cmd_weights,
    "efficient": _cmd_efficient,
    "liability": _cmd_liability,
    "spe": _cmd_spe,
    "check": _cmd_check,
    "simulate": _cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (
        CliError,
        FormatError,
        GraphError,
        RuleSpecError,
        WeightsError,
        GameError,
        AxiomError,
        SimError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
