"""Categorical variable schemas, immutable datasets, CSV ingestion, and
equal-frequency discretization of raw outputs.

Level values are dense integer codes 0..k-1 everywhere inside the package;
human-readable labels appear only at file boundaries.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DataError",
    "VariableSchema",
    "Dataset",
    "Discretization",
    "load_schema",
    "write_schema",
    "load_dataset",
    "write_dataset",
    "discretize",
    "bin_value",
    "append_record",
]

RAW_OUTPUT_COLUMN = "__raw_output"

ROLE_INPUT = "input"
ROLE_OUTPUT = "output"


class DataError(ValueError):
    """Raised for schema violations, malformed files, and label mismatches."""


@dataclass(frozen=True)
class VariableSchema:
    """One categorical variable: a name, its ordered level labels, and a role."""

    name: str
    levels: tuple[str, ...]
    role: str = ROLE_INPUT

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.name:
            raise DataError("variable name must be non-empty")
        if len(self.levels) < 2:
            raise DataError(f"variable {self.name!r} needs at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise DataError(f"variable {self.name!r} has duplicate level labels")
        if self.role not in (ROLE_INPUT, ROLE_OUTPUT):
            raise DataError(f"variable {self.name!r} has unknown role {self.role!r}")

    @property
    def cardinality(self) -> int:
        return len(self.levels)

    def index(self, label: str) -> int:
        try:
            return self.levels.index(label)
        except ValueError:
            raise DataError(
                f"label {label!r} is not a level of variable {self.name!r}"
            ) from None


class Dataset:
    """Immutable table of level codes, one column per schema variable.

    Exactly one variable carries the output role.  An optional raw_output
    vector keeps the undiscretized output value per row.
    """

    __slots__ = ("schema", "codes", "raw_output", "_name_idx")

    def __init__(
        self,
        schema: Sequence[VariableSchema],
        codes: Iterable[Sequence[int]] | np.ndarray,
        raw_output: Sequence[float] | np.ndarray | None = None,
    ):
        schema = tuple(schema)
        names = [v.name for v in schema]
        if len(set(names)) != len(names):
            raise DataError("duplicate variable names in schema")
        n_outputs = sum(1 for v in schema if v.role == ROLE_OUTPUT)
        if n_outputs != 1:
            raise DataError(f"dataset needs exactly one output variable, got {n_outputs}")

        arr = np.asarray(codes, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, len(schema))
        if arr.ndim != 2 or arr.shape[1] != len(schema):
            raise DataError(
                f"row width {arr.shape[1] if arr.ndim == 2 else '?'} does not match "
                f"schema width {len(schema)}"
            )
        for j, var in enumerate(schema):
            col = arr[:, j]
            if col.size and (col.min() < 0 or col.max() >= var.cardinality):
                bad = int(col[(col < 0) | (col >= var.cardinality)][0])
                raise DataError(
                    f"level code {bad} out of range for variable {var.name!r}"
                )
        arr.setflags(write=False)

        raw = None
        if raw_output is not None:
            raw = np.asarray(raw_output, dtype=float)
            if raw.shape != (arr.shape[0],):
                raise DataError("raw_output length does not match row count")
            raw.setflags(write=False)

        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "codes", arr)
        object.__setattr__(self, "raw_output", raw)
        object.__setattr__(self, "_name_idx", {v.name: i for i, v in enumerate(schema)})

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    @property
    def n_vars(self) -> int:
        return len(self.schema)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.schema)

    @property
    def output_variable(self) -> VariableSchema:
        return next(v for v in self.schema if v.role == ROLE_OUTPUT)

    def variable(self, name: str) -> VariableSchema:
        try:
            return self.schema[self._name_idx[name]]
        except KeyError:
            raise DataError(f"unknown variable {name!r}") from None

    def column_index(self, name: str) -> int:
        try:
            return self._name_idx[name]
        except KeyError:
            raise DataError(f"unknown variable {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.column_index(name)]

    def row(self, i: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.codes[i])

    def row_labels(self, i: int) -> dict[str, str]:
        return {v.name: v.levels[int(c)] for v, c in zip(self.schema, self.codes[i])}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.schema != other.schema:
            return False
        if not np.array_equal(self.codes, other.codes):
            return False
        if (self.raw_output is None) != (other.raw_output is None):
            return False
        if self.raw_output is not None and not np.array_equal(
            self.raw_output, other.raw_output
        ):
            return False
        return True

    def __repr__(self) -> str:
        return f"Dataset({self.n_rows} rows, {self.n_vars} vars)"


def load_schema(path: str | Path) -> tuple[VariableSchema, ...]:
    """Read a JSON schema file: a list of {name, levels, role} objects."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"schema file not found: {path}")
    try:
        entries = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"schema file {path} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise DataError(f"schema file {path} must hold a JSON list")
    out = []
    for e in entries:
        try:
            out.append(
                VariableSchema(e["name"], tuple(e["levels"]), e.get("role", ROLE_INPUT))
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed schema entry {e!r}") from exc
    return tuple(out)


def write_schema(schema: Sequence[VariableSchema], path: str | Path) -> None:
    entries = [
        {"name": v.name, "levels": list(v.levels), "role": v.role} for v in schema
    ]
    Path(path).write_text(json.dumps(entries, indent=2) + "\n")


def load_dataset(path: str | Path, schema: Sequence[VariableSchema]) -> Dataset:
    """Read a CSV of level labels against a declared schema.

    The header must name every schema variable (an optional trailing
    __raw_output column carries raw output values).  Errors name the
    offending file line and column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    schema = tuple(schema)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        names = [v.name for v in schema]
        has_raw = header and header[-1] == RAW_OUTPUT_COLUMN
        expected = names + [RAW_OUTPUT_COLUMN] if has_raw else names
        if header != expected:
            raise DataError(
                f"{path} header {header!r} does not match schema columns {expected!r}"
            )
        rows, raws = [], []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(expected):
                raise DataError(f"{path} row {lineno} has {len(cells)} cells, expected {len(expected)}")
            row = []
            for var, cell in zip(schema, cells):
                if cell not in var.levels:
                    raise DataError(
                        f"{path} row {lineno}, column {var.name!r}: unknown label {cell!r}"
                    )
                row.append(var.levels.index(cell))
            rows.append(row)
            if has_raw:
                try:
                    raws.append(float(cells[-1]))
                except ValueError:
                    raise DataError(
                        f"{path} row {lineno}, column {RAW_OUTPUT_COLUMN}: "
                        f"not a number: {cells[-1]!r}"
                    ) from None
    return Dataset(schema, rows, raws if has_raw else None)


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write labels (plus raw outputs when present) as CSV; round-trips with
    :func:`load_dataset`."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(dataset.names)
        if dataset.raw_output is not None:
            header.append(RAW_OUTPUT_COLUMN)
        writer.writerow(header)
        for i in range(dataset.n_rows):
            cells = [
                v.levels[int(c)] for v, c in zip(dataset.schema, dataset.codes[i])
            ]
            if dataset.raw_output is not None:
                cells.append(repr(float(dataset.raw_output[i])))
            writer.writerow(cells)


@dataclass(frozen=True)
class Discretization:
    """Result of equal-frequency binning: codes plus the frozen bin geometry.

    n_bins may be smaller than requested_bins when too few distinct values
    exist; a single bin marks a degenerate (constant) column.
    """

    codes: np.ndarray
    edges: np.ndarray
    n_bins: int
    requested_bins: int
    vmin: float
    vmax: float

    @property
    def degenerate(self) -> bool:
        return self.n_bins < 2

    @property
    def reduced(self) -> bool:
        return self.n_bins < self.requested_bins

    def midpoints(self) -> np.ndarray:
        """Representative raw value per bin (used to encode levels as reals)."""
        if self.n_bins == 1:
            return np.array([(self.vmin + self.vmax) / 2.0])
        bounds = np.concatenate([[self.vmin], self.edges, [self.vmax]])
        return (bounds[:-1] + bounds[1:]) / 2.0

    def bin_of(self, value: float) -> int:
        return bin_value(value, self.edges)

    def labels(self) -> tuple[str, ...]:
        return tuple(f"b{i}" for i in range(self.n_bins))


def bin_value(value: float, edges: np.ndarray) -> int:
    """Bin index of a raw value against frozen edges (right-open at edges)."""
    return int(np.searchsorted(edges, value, side="right"))


def discretize(values: Sequence[float] | np.ndarray, bins: int = 5) -> Discretization:
    """Equal-frequency binning into at most ``bins`` levels.

    Cut points sit at the quantile indices i*n/bins; each edge is the midpoint
    of the nearest pair of distinct adjacent sorted values, so every value
    maps to exactly one bin and the lowest bin contains the minimum.  Fewer
    distinct values than requested reduce the bin count.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise DataError("discretize needs a non-empty 1-d value array")
    if bins < 1:
        raise DataError("bins must be >= 1")
    s = np.sort(values)
    n = s.size
    boundaries = np.flatnonzero(s[1:] != s[:-1]) + 1  # j where s[j-1] != s[j]
    edges: list[float] = []
    if boundaries.size:
        for i in range(1, bins):
            c = (i * n) // bins
            c = min(max(c, 1), n - 1)
            # nearest valid boundary to c, preferring the left on ties
            k = np.searchsorted(boundaries, c)
            cand = []
            if k > 0:
                cand.append(boundaries[k - 1])
            if k < boundaries.size:
                cand.append(boundaries[k])
            j = min(cand, key=lambda b: (abs(int(b) - c), int(b)))
            edges.append(float((s[j - 1] + s[j]) / 2.0))
    edge_arr = np.array(sorted(set(edges)))
    codes = np.searchsorted(edge_arr, values, side="right").astype(np.int64)
    return Discretization(
        codes=codes,
        edges=edge_arr,
        n_bins=len(edge_arr) + 1,
        requested_bins=bins,
        vmin=float(s[0]),
        vmax=float(s[-1]),
    )


def append_record(
    dataset: Dataset,
    row: Sequence[int],
    raw_output: float | None = None,
) -> Dataset:
    """Return a new dataset with one row appended; the original is untouched."""
    row = tuple(int(c) for c in row)
    if len(row) != dataset.n_vars:
        raise DataError(
            f"row width {len(row)} does not match dataset width {dataset.n_vars}"
        )
    if (dataset.raw_output is not None) and raw_output is None:
        raise DataError("dataset carries raw outputs; raw_output is required")
    if (dataset.raw_output is None) and raw_output is not None and dataset.n_rows > 0:
        raise DataError("dataset has no raw outputs; cannot append one")
    new_codes = np.vstack([dataset.codes, np.asarray(row, dtype=np.int64)])
    new_raw = None
    if raw_output is not None:
        existing = (
            dataset.raw_output
            if dataset.raw_output is not None
            else np.empty(0, dtype=float)
        )
        new_raw = np.concatenate([existing, [float(raw_output)]])
    return Dataset(dataset.schema, new_codes, new_raw)
