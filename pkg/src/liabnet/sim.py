"""Monte-Carlo liability comparison on a layered supply network.

Generates an hourglass-shaped layered graph (wide supplier base, narrow
middle, wide customer base), treats each first-layer node as the shock
source in turn, draws many uniform loss functions, and compares rules on
the realized cancellation paths: total losses, path lengths, per-agent
mean and mean-squared liabilities, and the concentration (Gini) of the
liability profile.

Only rules whose equilibrium path reduces to a per-node greedy walk are
supported by the vectorized engine: fixed-weight rules with every
multi-option mover holding positive weight (the realized path is then a
cheapest path; ties broken toward the smallest node index) and the local
rule (each mover picks its cheapest outgoing edge). Losses are drawn as
floats, so ties have probability zero.

Determinism: the master seed derives one independent substream per source
via `numpy.random.SeedSequence.spawn`, and per-source results are merged
in source order, so outputs are byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .graph import Dag, reachable_subgraph
from .rules import FixedWeightRule, LocalRule, make_rule

DENSITY_RANGE = (0.0, 150.0)
DENSITY_BINS = 600
_CHUNK = 2500


class SimError(Exception):
    pass


@dataclass(frozen=True)
class LayeredGraphSpec:
    """Layer sizes and the two edge probabilities of the random network."""

    sizes: tuple[int, ...] = (30, 20, 15, 10, 15, 20)
    p_next: float = 0.4
    p_skip: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if len(self.sizes) < 2 or any(s < 1 for s in self.sizes):
            raise SimError("need at least two layers of positive size")
        for p in (self.p_next, self.p_skip):
            if not 0.0 <= p <= 1.0:
                raise SimError("edge probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class HourglassGraph:
    labels: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    layer_of: tuple[int, ...]
    sizes: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.labels)

    def layer_nodes(self, layer: int) -> list[int]:
        return [i for i, l in enumerate(self.layer_of) if l == layer]

    @property
    def sources(self) -> list[int]:
        return self.layer_nodes(0)

    @property
    def sinks(self) -> list[int]:
        return self.layer_nodes(len(self.sizes) - 1)

    def edge_labels(self) -> list[tuple[str, str]]:
        return [(self.labels[u], self.labels[v]) for u, v in self.edges]


def generate_hourglass(spec: LayeredGraphSpec) -> HourglassGraph:
    """Random layered graph: Bernoulli(p_next) edges to the next layer,
    Bernoulli(p_skip) edges skipping one layer, then deterministic
    repairs so every non-final node has an outgoing edge and every
    non-initial node an incoming one (hence every sink is reachable)."""
    rng = random.Random(spec.seed)
    sizes = spec.sizes
    layer_of: list[int] = []
    labels: list[str] = []
    for layer, size in enumerate(sizes):
        for k in range(size):
            labels.append(f"n{layer}_{k}")
            layer_of.append(layer)
    offsets = [0]
    for size in sizes:
        offsets.append(offsets[-1] + size)
    layers = [list(range(offsets[l], offsets[l + 1])) for l in range(len(sizes))]

    edge_set: set[tuple[int, int]] = set()
    for gap, p in ((1, spec.p_next), (2, spec.p_skip)):
        for l in range(len(sizes) - gap):
            for a in layers[l]:
                for b in layers[l + gap]:
                    if rng.random() < p:
                        edge_set.add((a, b))
    for l in range(len(sizes) - 1):
        for a in layers[l]:
            if not any((a, b) in edge_set for b in layers[l + 1] + (layers[l + 2] if l + 2 < len(sizes) else [])):
                edge_set.add((a, rng.choice(layers[l + 1])))
    for l in range(1, len(sizes)):
        for b in layers[l]:
            has_in = any((a, b) in edge_set for a in layers[l - 1] + (layers[l - 2] if l >= 2 else []))
            if not has_in:
                edge_set.add((rng.choice(layers[l - 1]), b))
    return HourglassGraph(
        labels=tuple(labels),
        edges=tuple(sorted(edge_set)),
        layer_of=tuple(layer_of),
        sizes=tuple(sizes),
    )


@dataclass(frozen=True)
class SimConfig:
    graph: LayeredGraphSpec = LayeredGraphSpec()
    draws: int = 10_000
    loss_low: float = 0.0
    loss_high: float = 100.0
    rules: tuple[str, ...] = ("fixed:wstar", "local")
    seed: int = 0

    def __post_init__(self):
        if self.draws < 1:
            raise SimError("draws must be at least 1")
        # loss_high == loss_low is allowed: a degenerate constant distribution
        if not 0.0 <= self.loss_low <= self.loss_high:
            raise SimError("need 0 <= loss_low <= loss_high")
        if len(self.rules) < 1:
            raise SimError("need at least one rule")

    @classmethod
    def from_dict(cls, data: Mapping) -> "SimConfig":
        seed = int(data.get("seed", 0))
        spec = LayeredGraphSpec(
            sizes=tuple(data.get("layers", (30, 20, 15, 10, 15, 20))),
            p_next=float(data.get("p_next", 0.4)),
            p_skip=float(data.get("p_skip", 0.1)),
            seed=seed,
        )
        return cls(
            graph=spec,
            draws=int(data.get("draws", 10_000)),
            loss_low=float(data.get("loss_low", 0.0)),
            loss_high=float(data.get("loss_high", 100.0)),
            rules=tuple(data.get("rules", ("fixed:wstar", "local"))),
            seed=seed,
        )

    @classmethod
    def from_file(cls, path) -> "SimConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SimStats:
    rules: tuple[str, ...]
    labels: tuple[str, ...]
    layer_of: tuple[int, ...]
    sizes: tuple[int, ...]
    total_draws: int
    mean_liab: dict
    mean_sq: dict
    per_layer: dict
    mean_realized: dict
    mean_length: dict
    mean_efficient: float
    gini_mean: dict
    gini_pooled_binned: dict
    better_mean: Optional[int]
    better_mean_sq: Optional[int]
    density: dict
    zero_counts: dict

    @property
    def nonsink(self) -> list[int]:
        last = len(self.sizes) - 1
        return [i for i, l in enumerate(self.layer_of) if l != last]


def gini(values) -> float:
    """Mean absolute difference over twice the mean; 0 for all-zero input."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return 0.0
    if np.any(arr < 0):
        raise SimError("gini needs non-negative values")
    total = arr.sum()
    if total == 0:
        return 0.0
    srt = np.sort(arr)
    n = arr.size
    ranks = np.arange(1, n + 1)
    return float(2.0 * (ranks * srt).sum() / (n * total) - (n + 1) / n)


def _weighted_gini(values: np.ndarray, weights: np.ndarray) -> float:
    mask = weights > 0
    x = values[mask].astype(float)
    w = weights[mask].astype(float)
    if x.size == 0:
        return 0.0
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    total_w = w.sum()
    sum_wx = (w * x).sum()
    if sum_wx == 0:
        return 0.0
    cum = np.cumsum(w)
    diff_sum = 2.0 * (w * x * (2.0 * cum - w - total_w)).sum()
    return float(diff_sum / (2.0 * total_w * sum_wx))


# ---------------------------------------------------------------------------
# per-source vectorized engine


def _prepare_engines(sub: Dag, specs: Sequence[str]):
    engines = []
    for spec in specs:
        rule = make_rule(spec, sub)
        if isinstance(rule, FixedWeightRule):
            if not rule.weights.in_delta_star(sub):
                raise SimError(
                    f"rule {spec!r} gives some multi-option mover zero weight; "
                    "its equilibrium path is not a greedy walk"
                )
            engines.append(("fixed", np.array([float(x) for x in rule.weights.values])))
        elif isinstance(rule, LocalRule):
            engines.append(("local", None))
        else:
            raise SimError(f"rule {spec!r} is not supported by the vectorized simulator")
    return engines


def _simulate_source(args):
    (labels, label_edges, src_label, specs, draws, low, high, seed_seq, n_global) = args
    sub = reachable_subgraph((list(labels), list(label_edges)), src_label)
    label_to_global = {lab: g for g, lab in enumerate(labels)}
    gmap = np.array([label_to_global[lab] for lab in sub.labels])
    engines = _prepare_engines(sub, specs)
    n = sub.n
    m = len(sub.edges)
    edge_col = {e: c for c, e in enumerate(sub.edges)}
    succ_cols = [np.array([edge_col[(i, j)] for j in sub.succ[i]], dtype=np.int64) for i in range(n)]
    succ_nodes = [np.array(sub.succ[i], dtype=np.int64) for i in range(n)]
    is_sink = [not sub.succ[i] for i in range(n)]

    bins = np.linspace(DENSITY_RANGE[0], DENSITY_RANGE[1], DENSITY_BINS + 1)
    out = {
        "liab": {r: np.zeros(n_global) for r in specs},
        "sq": {r: np.zeros(n_global) for r in specs},
        "real": {r: 0.0 for r in specs},
        "len": {r: 0 for r in specs},
        "eff": 0.0,
        "hist": {r: np.zeros(DENSITY_BINS, dtype=np.int64) for r in specs},
        "zeros": {r: 0 for r in specs},
    }
    rng = np.random.default_rng(seed_seq)
    done = 0
    while done < draws:
        ch = min(_CHUNK, draws - done)
        done += ch
        U = rng.uniform(low, high, size=(ch, m))
        L = np.zeros((ch, n))
        best = [None] * n
        for i in range(n - 1, -1, -1):
            if is_sink[i]:
                continue
            cand = U[:, succ_cols[i]] + L[:, succ_nodes[i]]
            L[:, i] = cand.min(axis=1)
            best[i] = cand.argmin(axis=1)
        teff = L[:, sub.source]
        out["eff"] += float(teff.sum())

        for spec, (kind, weights) in zip(specs, engines):
            if kind == "fixed":
                sum_t = float(teff.sum())
                sum_t2 = float((teff * teff).sum())
                out["real"][spec] += sum_t
                sub_liab = weights * sum_t
                sub_sq = (weights * weights) * sum_t2
                np.add.at(out["liab"][spec], gmap, sub_liab)
                np.add.at(out["sq"][spec], gmap, sub_sq)
                # walk the tight-argmin path only for its length
                visit = np.zeros((ch, n), dtype=bool)
                visit[:, sub.source] = True
                length = np.zeros(ch, dtype=np.int64)
                for i in range(n):
                    if is_sink[i]:
                        continue
                    rows = np.nonzero(visit[:, i])[0]
                    if rows.size == 0:
                        continue
                    nxt = succ_nodes[i][best[i][rows]]
                    visit[rows, nxt] = True
                    length[rows] += 1
                out["len"][spec] += int(length.sum())
                positive = weights > 0
                if positive.any():
                    vals = np.clip(
                        np.outer(teff, weights[positive]).ravel(),
                        DENSITY_RANGE[0],
                        DENSITY_RANGE[1] - 1e-9,
                    )
                    out["hist"][spec] += np.histogram(vals, bins=bins)[0]
                out["zeros"][spec] += ch * (n_global - int(positive.sum()))
            else:
                visit = np.zeros((ch, n), dtype=bool)
                visit[:, sub.source] = True
                total = np.zeros(ch)
                length = np.zeros(ch, dtype=np.int64)
                for i in range(n):
                    if is_sink[i]:
                        continue
                    rows = np.nonzero(visit[:, i])[0]
                    if rows.size == 0:
                        continue
                    cols = succ_cols[i]
                    local_cand = U[np.ix_(rows, cols)]
                    choice = local_cand.argmin(axis=1)
                    pay = local_cand[np.arange(rows.size), choice]
                    nxt = succ_nodes[i][choice]
                    visit[rows, nxt] = True
                    g = gmap[i]
                    out["liab"][spec][g] += float(pay.sum())
                    out["sq"][spec][g] += float((pay * pay).sum())
                    total[rows] += pay
                    length[rows] += 1
                    vals = np.clip(pay, DENSITY_RANGE[0], DENSITY_RANGE[1] - 1e-9)
                    out["hist"][spec] += np.histogram(vals, bins=bins)[0]
                out["real"][spec] += float(total.sum())
                n_pay = int(length.sum())
                out["len"][spec] += n_pay
                out["zeros"][spec] += ch * n_global - n_pay
    return out


def run_simulation(
    config: SimConfig,
    workers: int = 1,
    out_dir: Optional[str] = None,
    graph: Optional[HourglassGraph] = None,
) -> SimStats:
    """Run the full comparison and optionally write CSV/JSON artifacts.

    Results are independent of `workers`; it only sets process-level
    parallelism across sources.
    """
    hg = graph if graph is not None else generate_hourglass(config.graph)
    sources = hg.sources
    specs = tuple(config.rules)
    seed_children = np.random.SeedSequence(config.seed).spawn(len(sources))
    label_edges = tuple(hg.edge_labels())
    jobs = [
        (
            hg.labels,
            label_edges,
            hg.labels[src],
            specs,
            config.draws,
            config.loss_low,
            config.loss_high,
            seed_children[k],
            hg.n,
        )
        for k, src in enumerate(sources)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_source, jobs))
    else:
        results = [_simulate_source(job) for job in jobs]

    total_draws = config.draws * len(sources)
    liab = {r: np.zeros(hg.n) for r in specs}
    sq = {r: np.zeros(hg.n) for r in specs}
    real = {r: 0.0 for r in specs}
    length = {r: 0 for r in specs}
    eff = 0.0
    hist = {r: np.zeros(DENSITY_BINS, dtype=np.int64) for r in specs}
    zeros = {r: 0 for r in specs}
    for res in results:  # fixed source order keeps float sums deterministic
        eff += res["eff"]
        for r in specs:
            liab[r] += res["liab"][r]
            sq[r] += res["sq"][r]
            real[r] += res["real"][r]
            length[r] += res["len"][r]
            hist[r] += res["hist"][r]
            zeros[r] += res["zeros"][r]

    mean_liab = {r: liab[r] / total_draws for r in specs}
    mean_sq = {r: sq[r] / total_draws for r in specs}
    mean_real = {r: real[r] / total_draws for r in specs}
    mean_len = {r: length[r] / total_draws for r in specs}
    mean_eff = eff / total_draws
    for r in specs:
        balance_gap = abs(float(mean_liab[r].sum()) - mean_real[r])
        assert balance_gap <= 1e-6 * max(1.0, mean_real[r]), (
            f"per-agent means do not add up to the realized mean for {r}"
        )

    last = len(hg.sizes) - 1
    nonsink = np.array([i for i, l in enumerate(hg.layer_of) if l != last])
    gini_mean = {r: gini(mean_liab[r][nonsink]) for r in specs}
    bins = np.linspace(DENSITY_RANGE[0], DENSITY_RANGE[1], DENSITY_BINS + 1)
    mids = (bins[:-1] + bins[1:]) / 2.0
    gini_pooled = {}
    for r in specs:
        values = np.concatenate(([0.0], mids))
        weights = np.concatenate(([zeros[r]], hist[r])).astype(float)
        gini_pooled[r] = _weighted_gini(values, weights)

    better_mean = better_sq = None
    if len(specs) >= 2:
        a, b = specs[0], specs[1]
        better_mean = int((mean_liab[a][nonsink] < mean_liab[b][nonsink]).sum())
        better_sq = int((mean_sq[a][nonsink] < mean_sq[b][nonsink]).sum())

    layer_index = [
        [i for i, l in enumerate(hg.layer_of) if l == layer]
        for layer in range(len(hg.sizes))
    ]
    per_layer = {
        r: [
            (float(np.mean(mean_liab[r][idx])), float(np.mean(mean_sq[r][idx])))
            for idx in layer_index
        ]
        for r in specs
    }

    stats = SimStats(
        rules=specs,
        labels=hg.labels,
        layer_of=hg.layer_of,
        sizes=hg.sizes,
        total_draws=total_draws,
        mean_liab=mean_liab,
        mean_sq=mean_sq,
        per_layer=per_layer,
        mean_realized=mean_real,
        mean_length=mean_len,
        mean_efficient=mean_eff,
        gini_mean=gini_mean,
        gini_pooled_binned=gini_pooled,
        better_mean=better_mean,
        better_mean_sq=better_sq,
        density=hist,
        zero_counts=zeros,
    )
    if out_dir is not None:
        write_artifacts(stats, config, out_dir)
    return stats


# ---------------------------------------------------------------------------
# artifacts


def _fmt(x: float) -> str:
    return repr(float(x))


def write_artifacts(stats: SimStats, config: SimConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "per_agent.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent", "layer", "rule", "mean_liability", "mean_sq_liability"])
        for rule in stats.rules:
            for i, label in enumerate(stats.labels):
                w.writerow(
                    [
                        label,
                        stats.layer_of[i],
                        rule,
                        _fmt(stats.mean_liab[rule][i]),
                        _fmt(stats.mean_sq[rule][i]),
                    ]
                )

    with open(out / "per_layer.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "rule", "mean_liability", "mean_sq_liability"])
        for rule in stats.rules:
            for layer, (liab_mean, sq_mean) in enumerate(stats.per_layer[rule]):
                w.writerow([layer, rule, _fmt(liab_mean), _fmt(sq_mean)])

    bins = np.linspace(DENSITY_RANGE[0], DENSITY_RANGE[1], DENSITY_BINS + 1)
    with open(out / "density.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rule", "bin_left", "bin_right", "count"])
        for rule in stats.rules:
            for k in range(DENSITY_BINS):
                w.writerow(
                    [rule, _fmt(bins[k]), _fmt(bins[k + 1]), int(stats.density[rule][k])]
                )

    with open(out / "summary.json", "w") as fh:
        json.dump(summary_dict(stats, config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def summary_dict(stats: SimStats, config: SimConfig) -> dict:
    summary = {
        "config": {
            "layers": list(config.graph.sizes),
            "p_next": config.graph.p_next,
            "p_skip": config.graph.p_skip,
            "draws_per_source": config.draws,
            "loss_low": config.loss_low,
            "loss_high": config.loss_high,
            "rules": list(config.rules),
            "seed": config.seed,
        },
        "sources": int(stats.sizes[0]),
        "total_draws": stats.total_draws,
        "mean_efficient_total": stats.mean_efficient,
        "per_rule": {
            r: {
                "mean_realized_total": stats.mean_realized[r],
                "realized_over_efficient": (
                    stats.mean_realized[r] / stats.mean_efficient
                    if stats.mean_efficient
                    else 1.0
                ),
                "mean_path_length": stats.mean_length[r],
                "gini_mean_liabilities": stats.gini_mean[r],
                "gini_pooled_binned_approx": stats.gini_pooled_binned[r],
                "zero_liability_observations": stats.zero_counts[r],
            }
            for r in stats.rules
        },
        "gini_population": "per-agent mean liabilities over non-sink agents; "
        "the pooled variant is approximated from the density histogram",
        "nonsink_agents": len(stats.nonsink),
    }
    if stats.better_mean is not None:
        a, b = stats.rules[0], stats.rules[1]
        summary["better_off"] = {
            "pair": [a, b],
            "lower_mean_liability": stats.better_mean,
            "lower_mean_sq_liability": stats.better_mean_sq,
        }
    return summary
