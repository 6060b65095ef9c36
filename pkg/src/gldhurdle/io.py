"""Reading response/covariate tables and applying the truncation and log
transformations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["InputError", "Dataset", "ingest", "transform", "write_csv"]


class InputError(ValueError):
    """Bad input file, column or value."""


@dataclass(frozen=True)
class Dataset:
    response: np.ndarray
    covariates: dict = field(default_factory=dict)
    dropped: int = 0
    response_name: str = "y"

    @property
    def n(self) -> int:
        return len(self.response)

    def matrix(self, names, intercept: bool = True) -> np.ndarray:
        cols = [np.ones(self.n)] if intercept else []
        for name in names:
            if name not in self.covariates:
                raise InputError(f"unknown covariate column {name!r}")
            cols.append(self.covariates[name])
        if not cols:
            raise InputError("empty design matrix")
        return np.column_stack(cols)


def _parse(cell):
    text = cell.strip()
    if not text:
        return None
    try:
        val = float(text)
    except ValueError:
        return None
    return val if math.isfinite(val) else None


def ingest(path, response: str, covariates=()) -> Dataset:
    """Load the named numeric columns of a headered UTF-8 CSV file.

    Rows with a blank or non-numeric cell in any named column are
    dropped and counted.
    """
    covariates = list(covariates)
    names = [response] + [c for c in covariates if c != response]
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path} is empty") from None
        missing = [c for c in names if c not in header]
        if missing:
            raise InputError(f"column(s) not found in {path}: {', '.join(missing)}")
        idx = {c: header.index(c) for c in names}
        cols = {c: [] for c in names}
        dropped = 0
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = {c: _parse(row[i]) if i < len(row) else None for c, i in idx.items()}
            if any(v is None for v in vals.values()):
                dropped += 1
                continue
            for c, v in vals.items():
                cols[c].append(v)
    if not cols[response]:
        raise InputError(f"no usable rows in {path}")
    return Dataset(
        response=np.array(cols[response]),
        covariates={c: np.array(cols[c]) for c in covariates},
        dropped=dropped,
        response_name=response,
    )


def transform(values, threshold=None, log: bool = False) -> np.ndarray:
    """Set values strictly below ``threshold`` to 0, then (optionally)
    replace the non-zero values by their natural logarithm."""
    y = np.array(values, dtype=float)
    if threshold is not None:
        y[y < threshold] = 0.0
    if log:
        nz = y != 0.0
        if np.any(y[nz] <= 0.0):
            raise InputError("log transform needs positive non-zero values")
        y[nz] = np.log(y[nz])
    return y


def write_csv(path, header, rows) -> None:
    """Headered CSV with floats in repr form (exact and reproducible)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])
