"""Directory-based network storage.

Layout (all text files UTF-8, tab-separated, '#' starts a comment line):

    meta.json        {"n": int, "f": int, "classes": int, "relations": [names]}
    <relation>.edges one "src<TAB>dst" pair per line, 0-based node ids
    attributes.tsv   sparse triplets "node<TAB>dim<TAB>value"
    labels.tsv       "node<TAB>class"            (optional)
    splits.tsv       "node<TAB>train|val|test"   (optional)

Values are printed with 17 significant digits, so write followed by read
reproduces float64 data exactly.
"""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path

import numpy as np

from .autodiff import SparseMatrix
from .errors import ContractError, NetworkFormatError
from .graphs import SPLIT_TAGS, AttributedMultiplexNetwork

log = logging.getLogger(__name__)

_SAFE_NAME = re.compile(r"^[A-Za-z0-9._-]+$")


def _data_lines(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise NetworkFormatError("missing file", path=str(path)) from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def _parse_int(token: str, what: str, path: Path, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise NetworkFormatError(f"bad {what} {token!r}", str(path), lineno) from None


def _check_relation_name(name: str, path=None) -> None:
    if not _SAFE_NAME.match(name):
        raise NetworkFormatError(f"relation name {name!r} is not filename-safe", path=path)


def write_network(network: AttributedMultiplexNetwork, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in network.relation_names:
        _check_relation_name(name)
    meta = {
        "n": network.n,
        "f": network.num_attributes,
        "classes": network.classes,
        "relations": list(network.relation_names),
    }
    (directory / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    for name, adj in zip(network.relation_names, network.adjacencies):
        # both directions of every edge, so a load never needs symmetrization
        lines = [f"{i}\t{j}" for i, j in zip(adj.row_idx, adj.col_idx)]
        (directory / f"{name}.edges").write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    rows, dims = np.nonzero(network.attributes)
    attr_lines = [f"{i}\t{j}\t{network.attributes[i, j]:.17g}" for i, j in zip(rows, dims)]
    (directory / "attributes.tsv").write_text(
        "\n".join(attr_lines) + ("\n" if attr_lines else ""), encoding="utf-8")

    if network.labels is not None:
        lines = [f"{i}\t{network.labels[i]}" for i in network.labeled_indices()]
        (directory / "labels.tsv").write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    if network.splits is not None:
        lines = [f"{i}\t{network.splits[i]}" for i in range(network.n) if network.splits[i]]
        (directory / "splits.tsv").write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_network(directory) -> AttributedMultiplexNetwork:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise NetworkFormatError("missing file", path=str(meta_path)) from None
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"invalid JSON: {exc}", path=str(meta_path)) from None
    try:
        n = int(meta["n"])
        f = int(meta["f"])
        classes = int(meta["classes"])
        relation_names = [str(name) for name in meta["relations"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkFormatError(f"malformed meta.json: {exc}", path=str(meta_path)) from None
    if n < 1 or f < 1 or not relation_names:
        raise NetworkFormatError("meta.json must declare n >= 1, f >= 1 and at least one relation",
                                 path=str(meta_path))

    adjacencies = []
    for name in relation_names:
        _check_relation_name(name, path=str(meta_path))
        path = directory / f"{name}.edges"
        directed: set[tuple[int, int]] = set()
        for lineno, line in _data_lines(path):
            parts = line.split("\t")
            if len(parts) != 2:
                raise NetworkFormatError("expected 'src<TAB>dst'", str(path), lineno)
            src = _parse_int(parts[0], "node index", path, lineno)
            dst = _parse_int(parts[1], "node index", path, lineno)
            for node in (src, dst):
                if not 0 <= node < n:
                    raise NetworkFormatError(f"node index {node} out of range [0, {n})",
                                             str(path), lineno)
            if src == dst:
                raise NetworkFormatError(f"self-loop on node {src} rejected", str(path), lineno)
            directed.add((src, dst))
        asymmetric = sum(1 for (i, j) in directed if (j, i) not in directed)
        if asymmetric:
            log.warning("%s: symmetrized %d directed edge(s)", path, asymmetric)
        undirected = directed | {(j, i) for (i, j) in directed}
        if undirected:
            rows, cols = map(np.array, zip(*sorted(undirected)))
        else:
            rows = cols = np.array([], dtype=np.int64)
        adjacencies.append(SparseMatrix(n, n, rows, cols, np.ones(len(rows))))

    attr_path = directory / "attributes.tsv"
    attributes = np.zeros((n, f))
    seen: set[tuple[int, int]] = set()
    for lineno, line in _data_lines(attr_path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise NetworkFormatError("expected 'node<TAB>dim<TAB>value'", str(attr_path), lineno)
        node = _parse_int(parts[0], "node index", attr_path, lineno)
        dim = _parse_int(parts[1], "attribute index", attr_path, lineno)
        if not 0 <= node < n:
            raise NetworkFormatError(f"node index {node} out of range [0, {n})",
                                     str(attr_path), lineno)
        if not 0 <= dim < f:
            raise NetworkFormatError(f"attribute index {dim} out of range [0, {f})",
                                     str(attr_path), lineno)
        if (node, dim) in seen:
            raise NetworkFormatError(f"duplicate attribute entry ({node}, {dim})",
                                     str(attr_path), lineno)
        seen.add((node, dim))
        try:
            attributes[node, dim] = float(parts[2])
        except ValueError:
            raise NetworkFormatError(f"bad value {parts[2]!r}", str(attr_path), lineno) from None

    labels = None
    labels_path = directory / "labels.tsv"
    if labels_path.exists():
        labels = np.full(n, -1, dtype=np.int64)
        for lineno, line in _data_lines(labels_path):
            parts = line.split("\t")
            if len(parts) != 2:
                raise NetworkFormatError("expected 'node<TAB>class'", str(labels_path), lineno)
            node = _parse_int(parts[0], "node index", labels_path, lineno)
            cls = _parse_int(parts[1], "class id", labels_path, lineno)
            if not 0 <= node < n:
                raise NetworkFormatError(f"node index {node} out of range [0, {n})",
                                         str(labels_path), lineno)
            if not 0 <= cls < classes:
                raise NetworkFormatError(f"class id {cls} out of range [0, {classes})",
                                         str(labels_path), lineno)
            if labels[node] != -1:
                raise NetworkFormatError(f"node {node} labeled twice", str(labels_path), lineno)
            labels[node] = cls

    splits = None
    splits_path = directory / "splits.tsv"
    if splits_path.exists():
        splits = np.array([""] * n, dtype=object)
        for lineno, line in _data_lines(splits_path):
            parts = line.split("\t")
            if len(parts) != 2:
                raise NetworkFormatError("expected 'node<TAB>train|val|test'",
                                         str(splits_path), lineno)
            node = _parse_int(parts[0], "node index", splits_path, lineno)
            if not 0 <= node < n:
                raise NetworkFormatError(f"node index {node} out of range [0, {n})",
                                         str(splits_path), lineno)
            if parts[1] not in SPLIT_TAGS:
                raise NetworkFormatError(f"unknown split tag {parts[1]!r}",
                                         str(splits_path), lineno)
            if splits[node]:
                raise NetworkFormatError(f"node {node} tagged twice", str(splits_path), lineno)
            splits[node] = parts[1]

    try:
        return AttributedMultiplexNetwork(
            relation_names=relation_names,
            adjacencies=adjacencies,
            attributes=attributes,
            classes=classes,
            labels=labels,
            splits=splits,
        )
    except ContractError as exc:
        raise NetworkFormatError(str(exc), path=str(directory)) from exc
