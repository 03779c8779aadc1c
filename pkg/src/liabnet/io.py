"""JSON loading/saving for graphs, losses and weight files.

Graph file format::

    {
      "nodes": ["s", "a", "t"],
      "edges": [{"from": "s", "to": "a", "loss": 1.5}, ...],
      "source": "s"            # optional, inferred if unique
    }

`loss` is optional per edge. A separate losses file is a flat mapping
"from->to" -> number.
"""

from __future__ import annotations

import json
from pathlib import Path as FsPath
from typing import Mapping

from .graph import Dag, Edge, GraphError, Num, build_dag, validate


class FormatError(GraphError):
    """Raised on malformed input files."""


def parse_graph_data(data: dict) -> tuple[list[str], list[tuple[str, str]], dict, str | None]:
    """Split a parsed graph JSON object into (nodes, edges, label_losses, source)."""
    if not isinstance(data, dict) or "nodes" not in data or "edges" not in data:
        raise FormatError("graph file must be an object with 'nodes' and 'edges'")
    nodes = data["nodes"]
    if not isinstance(nodes, list) or not all(isinstance(x, str) for x in nodes):
        raise FormatError("'nodes' must be a list of string labels")
    edges: list[tuple[str, str]] = []
    label_losses: dict[tuple[str, str], float] = {}
    for k, e in enumerate(data["edges"]):
        if not isinstance(e, dict) or "from" not in e or "to" not in e:
            raise FormatError(f"edge #{k} must be an object with 'from' and 'to'")
        u, v = e["from"], e["to"]
        edges.append((u, v))
        if "loss" in e:
            x = e["loss"]
            if not isinstance(x, (int, float)) or isinstance(x, bool) or x < 0:
                raise FormatError(f"edge #{k} loss must be a non-negative number")
            label_losses[(u, v)] = x
    source = data.get("source")
    if source is not None and not isinstance(source, str):
        raise FormatError("'source' must be a string label")
    return nodes, edges, label_losses, source


def load_graph_file(path: str | FsPath) -> tuple[Dag, dict[Edge, float]]:
    """Load and build a graph file; returns (dag, losses-by-index).

    The losses dict may be partial or empty; operations that need a total
    loss function check for themselves.
    """
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    nodes, edges, label_losses, source = parse_graph_data(data)
    dag = build_dag(nodes, edges, source)
    losses = {(dag.index(u), dag.index(v)): x for (u, v), x in label_losses.items()}
    return dag, losses


def load_raw_graph_file(path: str | FsPath) -> tuple[list[str], list[tuple[str, str]], str | None]:
    """Load nodes/edges without building a Dag (for `validate`)."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    nodes, edges, _, source = parse_graph_data(data)
    return nodes, edges, source


def parse_edge_key(key: str) -> tuple[str, str]:
    if "->" not in key:
        raise FormatError(f"bad edge key {key!r}, expected 'from->to'")
    u, _, v = key.partition("->")
    return u.strip(), v.strip()


def load_losses_file(path: str | FsPath, dag: Dag) -> dict[Edge, float]:
    """Load a flat "from->to" -> loss mapping keyed to dag indices."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise FormatError("losses file must be an object mapping 'from->to' to numbers")
    losses: dict[Edge, float] = {}
    for key, x in data.items():
        u, v = parse_edge_key(key)
        if not isinstance(x, (int, float)) or isinstance(x, bool) or x < 0:
            raise FormatError(f"loss for {key!r} must be a non-negative number")
        e = (dag.index(u), dag.index(v))
        if not dag.has_edge(*e):
            raise FormatError(f"losses file names a non-edge {key!r}")
        losses[e] = x
    return losses


def load_weights_file(path: str | FsPath, dag: Dag) -> dict[int, float]:
    """Load a label -> weight mapping; missing labels default to 0."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise FormatError("weights file must be an object mapping labels to numbers")
    weights = {i: 0.0 for i in range(dag.n)}
    for label, x in data.items():
        if not isinstance(x, (int, float)) or isinstance(x, bool):
            raise FormatError(f"weight for {label!r} must be a number")
        weights[dag.index(label)] = float(x)
    return weights


def losses_to_labels(dag: Dag, losses: Mapping[Edge, Num]) -> dict[str, float]:
    return {
        f"{dag.labels[u]}->{dag.labels[v]}": float(x) for (u, v), x in sorted(losses.items())
    }


def dump_json(obj, pretty: bool = False) -> str:
    if pretty:
        return json.dumps(obj, indent=2, sort_keys=True)
    return json.dumps(obj, sort_keys=True)
