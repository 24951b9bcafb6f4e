"""Readers and writers for the on-disk formats used by the CLI."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .hierarchy import Hierarchy, parse_hierarchy
from .probmodel import ProbabilityError, align_columns, class_ids


class DataFileError(ValueError):
    pass


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DataFileError(f"cannot read {path}: {exc.strerror or exc}") from exc


def read_hierarchy(path) -> Hierarchy:
    return parse_hierarchy(_read_text(path))


def write_hierarchy(h: Hierarchy, path) -> None:
    Path(path).write_text(json.dumps(h.to_nested(), indent=1) + "\n")


def read_probs(path, h: Hierarchy) -> np.ndarray:
    """N x K matrix with columns in class-id order, matched by header name."""
    rows = list(csv.reader(_read_text(path).splitlines()))
    rows = [r for r in rows if r]
    if not rows:
        raise DataFileError(f"{path} is empty")
    cols = align_columns(h, [c.strip() for c in rows[0]])
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise DataFileError(f"{path}: non-numeric entry ({exc})") from exc
    if data.size == 0:
        raise DataFileError(f"{path} has a header but no rows")
    if data.shape[1] != len(rows[0]):
        raise DataFileError(f"{path}: rows have {data.shape[1]} fields, header has {len(rows[0])}")
    return data[:, cols]


def write_probs(probs: np.ndarray, h: Hierarchy, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(h.class_names)
        for row in probs:
            w.writerow([repr(float(x)) for x in row])


def read_labels(path, h: Hierarchy) -> list[int]:
    names = [line.strip() for line in _read_text(path).splitlines()]
    while names and not names[-1]:
        names.pop()
    return class_ids(h, names)


def write_labels(labels, h: Hierarchy, path) -> None:
    names = h.class_names
    Path(path).write_text("".join(f"{names[int(y)]}\n" for y in labels))


def read_prediction_lines(path, h: Hierarchy) -> list[tuple[int, ...]]:
    """Class-id tuples from the JSON-lines output of ``predict``."""
    out = []
    for i, line in enumerate(_read_text(path).splitlines()):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append(tuple(sorted(class_ids(h, [str(c) for c in rec["classes"]]))))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataFileError(f"{path} line {i + 1}: not a prediction record ({exc})") from exc
    return out


__all__ = [
    "DataFileError", "ProbabilityError", "read_hierarchy", "write_hierarchy", "read_probs", "write_probs",
    "read_labels", "write_labels", "read_prediction_lines",
]
