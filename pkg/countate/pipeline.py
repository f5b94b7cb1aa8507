"""
CSV ingestion and the transforms applied to real-world data before fitting.

Covers outcome binning to integer labels, threshold dichotomization of a
continuous exposure, crude rates, group-wise ATE tables and covariate balance.

"Garbage in, garbage out. So check what goes in." — schema.cx
"""

from __future__ import annotations

import logging
from collections.abc import Hashable, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import yaml

from .models import Dataset, FloatArray, IntArray
from .validation import ValidationError, validate_dataset

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# CSV schema, load and write
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CsvSchema:
    """
    Column mapping of a dataset CSV.

    ``x_cols=None`` means every column that is not mapped to something else or
    listed in ``exclude``. The intercept is never a CSV column; it is prepended
    when X is built.
    """

    y_col: str = "y"
    w_col: str = "w"
    x_cols: tuple[str, ...] | None = None
    delimiter: str = ","
    y0_col: str | None = None
    y1_col: str | None = None
    exclude: tuple[str, ...] = ()

    def reserved(self) -> set[str]:
        """Columns never read as covariates."""
        named = {c for c in (self.y_col, self.w_col, self.y0_col, self.y1_col) if c}
        return named | set(self.exclude)

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        data = asdict(self)
        data["x_cols"] = None if self.x_cols is None else list(self.x_cols)
        data["exclude"] = list(self.exclude)
        return data


def read_table(path: Path, delimiter: str = ",") -> pd.DataFrame:
    """
    Read a headed CSV with every cell kept as text.

    Raises:
        ValidationError: missing file, unparsable or empty content
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"File not found: {path}")
    try:
        frame = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise ValidationError(f"Empty CSV file: {path}") from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ValidationError(f"Could not parse {path}: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def _require_columns(frame: pd.DataFrame, columns: Sequence[str]) -> None:
    for col in columns:
        if col not in frame.columns:
            raise ValidationError(f"missing column '{col}'")


def numeric_column(frame: pd.DataFrame, col: str) -> FloatArray:
    """Parse a text column as floats, naming the first bad row (1-based, header excluded)."""
    raw = frame[col].astype(str).str.strip()
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = int(bad[0]) + 1
        raise ValidationError(f"missing or non-numeric value {raw.iloc[bad[0]]!r} in column '{col}' row {row}")
    return values


def count_column(frame: pd.DataFrame, col: str, label: str = "outcome") -> IntArray:
    """Parse a column of integer counts."""
    values = numeric_column(frame, col)
    fractional = np.flatnonzero(values != np.floor(values))
    if fractional.size:
        raise ValidationError(f"non-integer {label} row {int(fractional[0]) + 1}")
    return values.astype(np.int64)


def load_csv(path: Path, schema: CsvSchema | None = None) -> Dataset:
    """
    Load a dataset from CSV using an explicit column mapping.

    Raises:
        ValidationError: missing column, unparsable cell, non-integer outcome or
            any Dataset invariant violation
    """
    schema = schema or CsvSchema()
    frame = read_table(path, schema.delimiter)
    _require_columns(frame, [schema.y_col, schema.w_col])
    if schema.x_cols is None:
        x_cols = [c for c in frame.columns if c not in schema.reserved()]
    else:
        x_cols = list(schema.x_cols)
        _require_columns(frame, x_cols)

    y = count_column(frame, schema.y_col)
    w = count_column(frame, schema.w_col, label="treatment")
    covariates = [numeric_column(frame, c) for c in x_cols]
    X = np.column_stack([np.ones(len(frame))] + covariates) if len(frame) else np.ones((0, 1 + len(x_cols)))

    y0 = y1 = None
    if schema.y0_col and schema.y1_col and {schema.y0_col, schema.y1_col} <= set(frame.columns):
        y0 = count_column(frame, schema.y0_col)
        y1 = count_column(frame, schema.y1_col)

    dataset = Dataset(X=X, W=w, Y_obs=y, Y0=y0, Y1=y1, covariate_names=tuple(x_cols))
    validate_dataset(dataset)
    logger.debug("Loaded %d rows and %d covariates from %s", dataset.N, dataset.k, path)
    return dataset


def dataset_frame(dataset: Dataset, schema: CsvSchema | None = None) -> pd.DataFrame:
    """The dataset as a DataFrame in CSV column order (intercept omitted)."""
    schema = schema or CsvSchema()
    frame = pd.DataFrame({schema.y_col: dataset.Y_obs, schema.w_col: dataset.W})
    for j, name in enumerate(dataset.covariate_names, start=1):
        frame[name] = dataset.X[:, j]
    if dataset.has_truth and schema.y0_col and schema.y1_col:
        frame[schema.y0_col] = dataset.Y0
        frame[schema.y1_col] = dataset.Y1
    return frame


def write_csv(dataset: Dataset, path: Path, schema: CsvSchema | None = None) -> Path:
    """Write a dataset so that :func:`load_csv` with the same schema reads it back exactly."""
    schema = schema or CsvSchema()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset_frame(dataset, schema).to_csv(path, sep=schema.delimiter, index=False)
    return path


def load_truth_csv(path: Path, delimiter: str = ",") -> tuple[IntArray, IntArray]:
    """Read the (y0, y1) potential outcomes written by ``simulate``."""
    frame = read_table(path, delimiter)
    _require_columns(frame, ["y0", "y1"])
    return count_column(frame, "y0"), count_column(frame, "y1")


# ---------------------------------------------------------------------------
# Binning and exposure transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinningRule:
    """
    Maps real values to integer labels 1..n by interval membership.

    Inner intervals are [a, b); the last closed interval also includes its right
    edge. ``open_left`` adds (−∞, e_0) as the first label and ``open_right`` adds
    [e_last, ∞) as the last.
    """

    edges: tuple[float, ...]
    open_left: bool = False
    open_right: bool = False
    labels: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if not edges or not all(np.isfinite(edges)):
            raise ValidationError("Binning rule needs at least one finite edge")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValidationError("Bin edges must be strictly increasing")
        n = self.interval_count
        if n < 1:
            raise ValidationError("Binning rule covers no interval")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(1, n + 1)))
        elif tuple(self.labels) != tuple(range(1, n + 1)):
            raise ValidationError(f"Labels must be the consecutive integers 1..{n}")

    @property
    def interval_count(self) -> int:
        return len(self.edges) - 1 + int(self.open_left) + int(self.open_right)

    @classmethod
    def uniform(
        cls, start: float, stop: float, width: float, open_left: bool = False, open_right: bool = False
    ) -> BinningRule:
        """Equally spaced edges start, start+width, …, stop."""
        if width <= 0 or stop <= start:
            raise ValidationError(f"Invalid uniform bins: start={start}, stop={stop}, width={width}")
        count = int(round((stop - start) / width))
        edges = tuple(start + width * i for i in range(count + 1))
        return cls(edges=edges, open_left=open_left, open_right=open_right)

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return {
            "edges": list(self.edges),
            "open_left": self.open_left,
            "open_right": self.open_right,
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BinningRule:
        """Create from dictionary."""
        if "edges" not in data:
            raise ValidationError("Binning rule must define 'edges'")
        return cls(
            edges=tuple(data["edges"]),
            open_left=bool(data.get("open_left", False)),
            open_right=bool(data.get("open_right", False)),
            labels=tuple(int(v) for v in data.get("labels", ())),
        )

    @classmethod
    def from_yaml(cls, path: Path) -> BinningRule:
        """Load a rule from a YAML file."""
        try:
            with open(path) as f:
                data = yaml.safe_load(f)
        except FileNotFoundError as e:
            raise ValidationError(f"Binning rule file not found: {path}") from e
        except yaml.YAMLError as e:
            raise ValidationError(f"Invalid binning rule YAML in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ValidationError(f"Binning rule in {path} must be a mapping")
        return cls.from_dict(data)


def bin_outcome(values: Sequence[float] | FloatArray, rule: BinningRule) -> IntArray:
    """
    Label every value with the interval it falls in.

    Raises:
        ValidationError: a non-finite value, or one outside the covered range
    """
    v = np.asarray(values, dtype=np.float64)
    edges = np.asarray(rule.edges)
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        raise ValidationError(f"Non-finite value at index {bad[0]}")

    idx = np.searchsorted(edges, v, side="right")
    if not rule.open_right:
        # the last closed interval includes its right edge
        idx = np.where(v == edges[-1], len(edges) - 1, idx)
    outside = (idx == 0) & (not rule.open_left) | (idx == len(edges)) & (not rule.open_right)
    bad = np.flatnonzero(outside)
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"Value {v[i]} at index {i} is outside the binning range")
    return (idx + (1 if rule.open_left else 0)).astype(np.int64)


def dichotomize(exposure: Sequence[float] | FloatArray, h: float) -> IntArray:
    """W_i = 1 iff exposure_i ≥ h."""
    x = np.asarray(exposure, dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise ValidationError(f"Non-finite exposure at index {bad[0]}")
    return (x >= h).astype(np.int64)


def crude_rate(
    counts: Sequence[float] | FloatArray, population: Sequence[float] | FloatArray, q: int = 5
) -> FloatArray:
    """Counts per 10^q population."""
    c = np.asarray(counts, dtype=np.float64)
    p = np.asarray(population, dtype=np.float64)
    if c.shape != p.shape:
        raise ValidationError("counts and population must have the same length")
    bad = np.flatnonzero(~(p > 0))
    if bad.size:
        raise ValidationError(f"Population must be positive, got {p[bad[0]]} at index {bad[0]}")
    return 10.0**q * c / p


# ---------------------------------------------------------------------------
# Group-wise ATE
# ---------------------------------------------------------------------------


@dataclass
class GroupAte:
    """One row of a group-wise ATE table; ``ate`` is None for an empty group."""

    group: Hashable
    ate: float | None
    n_units: int
    weight: float

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return asdict(self)


def groupwise_ate(
    dataset: Dataset,
    imputations: IntArray,
    grouping: Sequence[Hashable],
    groups: Sequence[Hashable] | None = None,
) -> list[GroupAte]:
    """
    Within-group ATEs averaged over the R imputations.

    weight_g = n_g / N, so Σ weight_g · ate_g equals the overall ATE mean.

    Args:
        dataset: Observed data
        imputations: R × N matrix of imputed missing outcomes
        grouping: Group label of every unit
        groups: Groups to report, in order; defaults to the sorted labels present.
            Listed groups without units get ``ate=None``.
    """
    labels = np.asarray(list(grouping), dtype=object)
    if labels.shape[0] != dataset.N:
        raise ValidationError(f"Grouping has {labels.shape[0]} labels for {dataset.N} units")
    imputations = np.asarray(imputations)
    if imputations.ndim != 2 or imputations.shape[1] != dataset.N:
        raise ValidationError(f"Imputations must be R × {dataset.N}, got shape {imputations.shape}")

    effects = (2 * dataset.W - 1) * (dataset.Y_obs[None, :] - imputations)
    unit_effect = effects.mean(axis=0)
    order = list(groups) if groups is not None else sorted(set(labels.tolist()), key=str)

    rows = []
    for g in order:
        sel = labels == g
        n_g = int(sel.sum())
        ate = float(unit_effect[sel].mean()) if n_g else None
        rows.append(GroupAte(group=g, ate=ate, n_units=n_g, weight=n_g / dataset.N))
    return rows


# ---------------------------------------------------------------------------
# Balance and dispersion diagnostics
# ---------------------------------------------------------------------------


@dataclass
class BalanceRow:
    """
    Arm means, variances and standardized mean difference of one covariate.

    smd = (θ₁ − θ₀) / √(v₀/n₀ + v₁/n₁); None when the denominator is zero.
    """

    covariate: str
    smd: float | None
    theta0: float
    theta1: float
    v0: float
    v1: float
    n0: int
    n1: int

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return asdict(self)


def balance_rows(covariates: FloatArray, w: IntArray, names: Sequence[str]) -> list[BalanceRow]:
    """Balance statistics for the columns of ``covariates`` (no intercept)."""
    cov = np.asarray(covariates, dtype=np.float64)
    w = np.asarray(w)
    if cov.ndim != 2 or cov.shape[0] != w.shape[0] or cov.shape[1] != len(names):
        raise ValidationError("Covariate matrix, treatment and names do not line up")
    treated = w == 1
    n1 = int(treated.sum())
    n0 = int((~treated).sum())
    if n0 == 0 or n1 == 0:
        raise ValidationError(f"Both arms need units, got n0={n0}, n1={n1}")

    rows = []
    for j, name in enumerate(names):
        x0, x1 = cov[~treated, j], cov[treated, j]
        v0 = float(x0.var(ddof=1)) if n0 > 1 else float("nan")
        v1 = float(x1.var(ddof=1)) if n1 > 1 else float("nan")
        theta0, theta1 = float(x0.mean()), float(x1.mean())
        denom = np.sqrt(v0 / n0 + v1 / n1)
        smd = float((theta1 - theta0) / denom) if np.isfinite(denom) and denom > 0 else None
        rows.append(BalanceRow(name, smd, theta0, theta1, v0, v1, n0, n1))
    return rows


def balance_table(dataset: Dataset, mask: np.ndarray | None = None) -> list[BalanceRow]:
    """
    Standardized mean differences of every covariate, optionally on a subset.

    Raises:
        ValidationError: an arm is empty
    """
    data = dataset if mask is None else dataset.subset(np.asarray(mask, dtype=bool))
    return balance_rows(data.X[:, 1:], data.W, data.covariate_names)


@dataclass
class ArmDispersion:
    """Empirical mean and variance of the observed counts in one arm."""

    arm: str
    n: int
    mean: float
    variance: float

    @property
    def ratio(self) -> float:
        """Variance-to-mean ratio; 1 for Poisson counts."""
        return self.variance / self.mean if self.mean > 0 else float("nan")

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return {**asdict(self), "ratio": self.ratio}


def arm_dispersion(dataset: Dataset) -> list[ArmDispersion]:
    """Per-arm mean and unbiased variance of Y_obs."""
    rows = []
    for arm, value in (("control", 0), ("treated", 1)):
        y = dataset.Y_obs[dataset.W == value].astype(np.float64)
        var = float(y.var(ddof=1)) if y.size > 1 else float("nan")
        mean = float(y.mean()) if y.size else float("nan")
        rows.append(ArmDispersion(arm=arm, n=int(y.size), mean=mean, variance=var))
    return rows
