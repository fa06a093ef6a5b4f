"""Matched-pair difference data: construction, CSV ingestion and splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from crossscreen.errors import InputError, ParseError


@dataclass(frozen=True)
class PairDiffMatrix:
    """Treated-minus-control differences, one row per pair and one column per outcome.

    The array is copied and made read-only on construction.
    """

    values: np.ndarray
    outcome_names: tuple[str, ...] = ()
    pair_ids: tuple[str, ...] = ()

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"expected a non-empty I x K matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("pair differences must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        n_pairs, n_outcomes = arr.shape
        names = tuple(self.outcome_names) or tuple(f"y{k + 1}" for k in range(n_outcomes))
        ids = tuple(self.pair_ids) or tuple(str(i + 1) for i in range(n_pairs))
        if len(names) != n_outcomes:
            raise InputError(f"{len(names)} outcome names for {n_outcomes} columns")
        if len(ids) != n_pairs:
            raise InputError(f"{len(ids)} pair ids for {n_pairs} rows")
        object.__setattr__(self, "outcome_names", tuple(str(n) for n in names))
        object.__setattr__(self, "pair_ids", tuple(str(i) for i in ids))

    @property
    def n_pairs(self) -> int:
        return self.values.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.values.shape[1]

    def take(self, rows) -> "PairDiffMatrix":
        """Sub-matrix of the given pairs (all outcomes kept)."""
        rows = np.asarray(rows, dtype=int)
        return PairDiffMatrix(
            self.values[rows],
            self.outcome_names,
            tuple(self.pair_ids[i] for i in rows),
        )


@dataclass(frozen=True)
class SplitAssignment:
    half1: tuple[int, ...]
    half2: tuple[int, ...]
    kind: str = "random"
    seed: int | None = None
    label: str | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "half1": list(self.half1), "half2": list(self.half2)}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.label is not None:
            out["label"] = self.label
        return out


def pair_differences(treated, control, log2=False, shift_one_on_zero=False, outcome_names=()):
    """Differences ``f(treated) - f(control)`` with ``f`` the identity or ``log2``.

    With ``shift_one_on_zero`` the log is taken of ``x + 1`` so zero responses are allowed.
    """
    t = np.asarray(treated, dtype=float)
    c = np.asarray(control, dtype=float)
    if t.shape != c.shape:
        raise InputError(f"treated shape {t.shape} does not match control shape {c.shape}")
    if log2:
        if np.any(t < 0) or np.any(c < 0):
            raise InputError("log2 differences need nonnegative responses")
        offset = 1.0 if shift_one_on_zero else 0.0
        if offset == 0.0 and (np.any(t == 0) or np.any(c == 0)):
            raise InputError("zero response with log2; pass shift_one_on_zero to add one first")
        y = np.log2(t + offset) - np.log2(c + offset)
    else:
        y = t - c
    return PairDiffMatrix(y, outcome_names)


def load_pairs(path) -> PairDiffMatrix:
    """Read a CSV of pair differences: header of outcome names, one numeric row per pair.

    Parsing is strict. Ragged rows, empty or non-numeric cells raise :class:`ParseError`
    naming the offending row (1-based, header is row 1) and column.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise ParseError("empty file: no header row")
    header = [h.strip() for h in rows[0]]
    if any(not h for h in header):
        raise ParseError("blank outcome name in header", row=1)
    body = [(n, r) for n, r in enumerate(rows[1:], start=2) if r]
    if not body:
        raise ParseError("no data rows")
    data = np.empty((len(body), len(header)))
    for i, (lineno, row) in enumerate(body):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(row)}", row=lineno)
        for k, cell in enumerate(row):
            try:
                value = float(cell.strip())
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", row=lineno, column=header[k]) from None
            if not math.isfinite(value):
                raise ParseError(f"non-finite cell {cell!r}", row=lineno, column=header[k])
            data[i, k] = value
    return PairDiffMatrix(data, tuple(header))


def random_split(m: PairDiffMatrix | int, seed: int) -> SplitAssignment:
    """Uniform random halves; the first gets ``floor(I/2)`` pairs."""
    n = m if isinstance(m, int) else m.n_pairs
    if n < 2:
        raise InputError("need at least 2 pairs to split")
    perm = np.random.default_rng(seed).permutation(n)
    h = n // 2
    return SplitAssignment(
        tuple(sorted(int(i) for i in perm[:h])),
        tuple(sorted(int(i) for i in perm[h:])),
        kind="random",
        seed=seed,
    )


def covariate_split(m: PairDiffMatrix | int, labels: Sequence) -> SplitAssignment:
    """Split by a binary pair-level covariate.

    The first half is the group of the label value that sorts first, so ``("B", "A", "B", "A")``
    gives ``half1 = (1, 3)``.
    """
    n = m if isinstance(m, int) else m.n_pairs
    labels = list(labels)
    if len(labels) != n:
        raise InputError(f"{len(labels)} labels for {n} pairs")
    levels = sorted(set(labels), key=str)
    if len(levels) != 2:
        raise InputError(f"covariate split needs exactly two label values, found {len(levels)}")
    first = levels[0]
    return SplitAssignment(
        tuple(i for i, v in enumerate(labels) if v == first),
        tuple(i for i, v in enumerate(labels) if v != first),
        kind="covariate",
        label=f"{levels[0]}|{levels[1]}",
    )
