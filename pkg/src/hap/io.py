"""JSON problem/solution/tree files and CSV tables."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np

from .core import HierarchySolution, LayeredProblem
from .datagen import ALPHABET, GenerationTree

NEG_INF_TOKEN = "-inf"


class FormatError(ValueError):
    pass


def _num_out(x: float):
    if x == -math.inf:
        return NEG_INF_TOKEN
    if not math.isfinite(x):
        raise FormatError(f"cannot serialise {x}")
    return float(x)


def _num_in(x) -> float:
    if isinstance(x, str):
        if x.strip().lower() in ("-inf", "-infinity"):
            return -math.inf
        raise FormatError(f"unexpected string {x!r} in numeric field")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise FormatError(f"unexpected value {x!r} in numeric field")
    return float(x)


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        # mkstemp creates 0600 files; give the result the usual umask-based mode
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {str(k): _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_builtin(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _num_out(float(obj))
    if isinstance(obj, float):
        return _num_out(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, doc: dict, indent: int | None = 1, convert: bool = True):
    """Write ``doc`` atomically. Floats use repr, the shortest string that parses back to the same double.

    ``convert=False`` skips the numpy-to-builtin walk for documents that are
    already plain Python (large problem files).
    """
    if convert:
        doc = _to_builtin(doc)
    separators = None if indent is not None else (",", ":")
    atomic_write_text(path, json.dumps(doc, indent=indent, separators=separators, allow_nan=False) + "\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


# problems

def _flat_numbers(arr: np.ndarray) -> list:
    """Row-major list of floats with ``-inf`` replaced by its token."""
    flat = arr.ravel()
    if np.isnan(flat).any() or (flat == math.inf).any():
        raise FormatError("cannot serialise NaN or +inf")
    out = flat.tolist()
    for k in np.flatnonzero(flat == -math.inf):
        out[k] = NEG_INF_TOKEN
    return out


def problem_to_doc(problem: LayeredProblem) -> dict:
    return {
        "n": problem.num_points,
        "layers": problem.num_layers,
        "similarities": [_flat_numbers(layer) for layer in problem.similarity],
        "preferences": [_flat_numbers(row) for row in problem.preference],
        "metadata": _to_builtin(problem.metadata),
    }


def problem_from_doc(doc: dict) -> LayeredProblem:
    try:
        n, L = int(doc["n"]), int(doc["layers"])
        raw_s, raw_c = doc["similarities"], doc["preferences"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"problem document missing field: {exc}") from exc
    if len(raw_s) != L or len(raw_c) != L:
        raise FormatError(f"expected {L} layers of similarities and preferences")
    s = np.empty((L, n, n))
    for l, layer in enumerate(raw_s):
        if doc.get("sparse"):
            s[l] = -math.inf
            for entry in layer:
                s[l, int(entry["i"]), int(entry["j"])] = _num_in(entry["value"])
            s[l][np.diag_indices(n)] = 0.0
            continue
        flat = np.asarray(layer, dtype=object).ravel() if layer and isinstance(layer[0], list) else layer
        if len(flat) != n * n:
            raise FormatError(f"layer {l + 1}: expected {n * n} similarities, got {len(flat)}")
        s[l] = np.array([_num_in(v) for v in flat]).reshape(n, n)
    c = np.array([[_num_in(v) for v in row] for row in raw_c])
    if c.shape != (L, n):
        raise FormatError(f"preferences must be {L} x {n}")
    return LayeredProblem(s, c, metadata=doc.get("metadata") or {})


def write_problem(path, problem: LayeredProblem):
    write_json(path, problem_to_doc(problem), indent=None, convert=False)


def read_problem(path) -> LayeredProblem:
    return problem_from_doc(read_json(path))


# solutions

def solution_to_doc(sol: HierarchySolution, method: str = "", objective=None, config=None, trace=None) -> dict:
    layers = []
    for l in range(sol.num_layers):
        act = sol.active(l)
        layers.append({
            "active": act.tolist(),
            "exemplars": sol.exemplars(l).tolist(),
            "assignment": sol.assignment[l][act].tolist(),
        })
    return {
        "method": method,
        "n": sol.num_points,
        "layers": layers,
        "objective": objective,
        "config": config or {},
        "trace": trace or {},
    }


def solution_from_doc(doc: dict) -> HierarchySolution:
    try:
        n = int(doc["n"])
        layers = []
        for layer in doc["layers"]:
            a = np.full(n, -1, dtype=int)
            act = np.asarray(layer["active"], dtype=int)
            a[act] = np.asarray(layer["assignment"], dtype=int)
            layers.append(a)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"malformed solution document: {exc}") from exc
    sol = HierarchySolution(layers)
    bad = sol.violations()
    if bad:
        raise FormatError("invalid hierarchy: " + "; ".join(bad))
    return sol


def write_solution(path, sol, **fields):
    write_json(path, solution_to_doc(sol, **fields))


def read_solution(path) -> tuple:
    """Returns ``(solution, document)``."""
    doc = read_json(path)
    return solution_from_doc(doc), doc


# trees

def tree_to_doc(tree: GenerationTree) -> dict:
    payload = tree.sequences() if tree.kind == "seq" else tree.payload.tolist()
    return {
        "kind": tree.kind,
        "parent": tree.parent.tolist(),
        "origin": tree.origin.tolist(),
        "payload": payload,
        "metadata": tree.metadata,
    }


def tree_from_doc(doc: dict) -> GenerationTree:
    try:
        kind = doc["kind"]
        if kind == "seq":
            payload = np.array([[ALPHABET.index(ch) for ch in seq] for seq in doc["payload"]], dtype=np.int8)
        else:
            payload = np.asarray(doc["payload"], dtype=float)
        return GenerationTree(doc["parent"], doc["origin"], payload, kind, doc.get("metadata") or {})
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed tree document: {exc}") from exc


def write_tree(path, tree: GenerationTree):
    write_json(path, tree_to_doc(tree))


def read_tree(path) -> GenerationTree:
    return tree_from_doc(read_json(path))


# tables

def write_csv(path, header, rows):
    buf = StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
