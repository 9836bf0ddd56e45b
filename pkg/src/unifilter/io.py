"""Plain-text file formats for graphs, labels, features and splits.

Edge lists hold one whitespace-separated ``u v`` pair per line (0-indexed),
label files one integer per line (row ``i`` is node ``i``), feature files a
whitespace-delimited numeric matrix, and split files a JSON object with
``train``, ``val`` and ``test`` index arrays. Lines starting with ``#`` and
blank lines are ignored in the text formats.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import GraphFormatError
from .graph import Graph, LabeledSplit


def _content_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if text and not text.startswith("#"):
                yield lineno, text


def load_graph(path, n_hint=None) -> Graph:
    """Read an edge list into a canonical :class:`Graph`."""
    src, dst = [], []
    for lineno, text in _content_lines(path):
        parts = text.split()
        if len(parts) != 2:
            raise GraphFormatError(f"expected 2 fields, found {len(parts)}", path, lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"non-integer node index in {text!r}", path, lineno) from None
        if u < 0 or v < 0:
            raise GraphFormatError(f"negative node index in {text!r}", path, lineno)
        src.append(u)
        dst.append(v)
    if not src:
        raise GraphFormatError("edge list is empty", path)
    return Graph.from_edges(src, dst, n=n_hint)


def save_graph(g: Graph, path) -> None:
    u, v = g.edges()
    np.savetxt(path, np.column_stack([u, v]), fmt="%d")


def load_labels(path, n=None) -> np.ndarray:
    labels = []
    for lineno, text in _content_lines(path):
        try:
            labels.append(int(text))
        except ValueError:
            raise GraphFormatError(f"label must be an integer, found {text!r}", path, lineno) from None
    if not labels:
        raise GraphFormatError("label file is empty", path)
    labels = np.asarray(labels, dtype=np.int64)
    if n is not None and labels.size != n:
        raise GraphFormatError(f"expected {n} labels, found {labels.size}", path)
    return labels


def save_labels(labels, path) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")


def load_features(path, n=None) -> np.ndarray:
    try:
        x = np.loadtxt(path, dtype=np.float64, ndmin=2, comments="#")
    except ValueError as exc:
        raise GraphFormatError(f"malformed feature matrix ({exc})", path) from None
    if x.size == 0:
        raise GraphFormatError("feature file is empty", path)
    if n is not None and x.shape[0] != n:
        raise GraphFormatError(f"expected {n} feature rows, found {x.shape[0]}", path)
    return x


def save_features(x, path, fmt="%.17g") -> None:
    np.savetxt(path, np.asarray(x), fmt=fmt)


def load_split(path, labels) -> LabeledSplit:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"invalid JSON ({exc.msg})", path, exc.lineno) from None
    missing = [k for k in ("train", "val", "test") if k not in raw]
    if missing:
        raise GraphFormatError(f"split is missing keys {missing}", path)
    try:
        return LabeledSplit(labels=labels, train=raw["train"], val=raw["val"], test=raw["test"])
    except (TypeError, ValueError) as exc:
        raise GraphFormatError(str(exc), path) from None


def save_split(split: LabeledSplit, path) -> None:
    payload = {k: split.subset(k).tolist() for k in ("train", "val", "test")}
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
