"""
Timing and accuracy sweep over dataset sizes and engines.

Every (N, replication) cell simulates a fresh dataset and runs each requested
engine on it, recording wall-clock seconds and |ATE − true ATE|.

"Parallelism is just organized chaos. But faster." — schema.cx
"""

from __future__ import annotations

import logging
import threading
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import pandas as pd

from .closed_form import AteVariant, fit_closed_form
from .gibbs import GibbsConfig, ProgressCallback, run_chain
from .imputation import estimate_ate
from .models import Dataset, ModelSpec, Overdispersion
from .oracle import OracleConfig, run_oracle
from .random_streams import RngStream
from .synthetic import SimModel, SimSpec, generate, true_ate
from .validation import CountateError, ValidationError, validate_grid

logger = logging.getLogger(__name__)

ROW_COLUMNS = [
    "n", "engine", "replication", "status", "seconds",
    "ate_mean", "ate_sd", "true_ate", "abs_error",
]


class BenchEngine(str, Enum):
    CLOSED_FORM = "closed-form"
    APPROX = "approx"
    EXACT = "exact"


class CellStatus(str, Enum):
    OK = "ok"
    TIMEOUT = "timeout"
    SKIPPED = "skipped"
    FAILED = "failed"


@dataclass(frozen=True)
class BenchmarkConfig:
    """
    One benchmark sweep.

    ``timeout`` bounds each engine run in seconds (None for no limit). The oracle
    discards ``oracle_burn_in`` iterations, a fifth of ``oracle_iters`` when unset.
    The exact engine is skipped for N above ``exact_max_n``; closed-form only runs
    when ``sigma`` is 0.
    """

    model: SimModel = SimModel.SIMPLE
    n_grid: tuple[int, ...] = (500, 1000)
    replications: int = 3
    engines: tuple[BenchEngine, ...] = (BenchEngine.CLOSED_FORM, BenchEngine.APPROX)
    sigma: float = 0.0
    iters: int = 1000
    burn_in: int = 200
    oracle_iters: int = 20000
    oracle_burn_in: int | None = None
    timeout: float | None = 600.0
    exact_max_n: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValidationError(f"replications must be positive, got {self.replications}")
        validate_grid(self.n_grid, "n grid", minimum=1)
        for n in self.n_grid:
            if int(n) != n or n % 2:
                raise ValidationError(f"Every N in the grid must be an even integer, got {n}")
        if not self.engines:
            raise ValidationError("At least one engine is required")
        if self.timeout is not None and self.timeout <= 0:
            raise ValidationError(f"timeout must be positive, got {self.timeout}")
        # schedules validate themselves
        GibbsConfig(iterations=self.iters, burn_in=self.burn_in)
        self.oracle_config()

    def oracle_config(self) -> OracleConfig:
        burn_in = self.oracle_iters // 5 if self.oracle_burn_in is None else self.oracle_burn_in
        return OracleConfig(iterations=self.oracle_iters, burn_in=burn_in)

    @property
    def model_spec(self) -> ModelSpec:
        family = Overdispersion.LOGNORMAL_POISSON if self.sigma > 0 else Overdispersion.POISSON
        return ModelSpec(overdispersion=family)

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        data = asdict(self)
        data["model"] = self.model.value
        data["n_grid"] = list(self.n_grid)
        data["engines"] = [e.value for e in self.engines]
        return data


@dataclass
class BenchmarkRow:
    """One (N, engine, replication) cell; estimates are None unless status is ok."""

    n: int
    engine: str
    replication: int
    status: str
    seconds: float | None = None
    ate_mean: float | None = None
    ate_sd: float | None = None
    true_ate: float | None = None
    abs_error: float | None = None

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return asdict(self)


@dataclass
class BenchmarkResult:
    """All rows of a sweep, in (N, replication, engine) order."""

    config: BenchmarkConfig
    rows: list[BenchmarkRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=ROW_COLUMNS)

    def summary(self) -> pd.DataFrame:
        """Per (N, engine): completed cells, MAE, median absolute error and mean seconds."""
        frame = self.to_frame()
        done = frame[frame["status"] == CellStatus.OK.value]
        if done.empty:
            return pd.DataFrame(columns=["n", "engine", "cells", "mae", "median_abs_error", "mean_seconds"])
        grouped = done.groupby(["n", "engine"], sort=True)
        return grouped.agg(
            cells=("abs_error", "size"),
            mae=("abs_error", "mean"),
            median_abs_error=("abs_error", "median"),
            mean_seconds=("seconds", "mean"),
        ).reset_index()

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path


EngineRun = Callable[[Dataset, RngStream, ProgressCallback], tuple[float, float]]


class CellCancelled(Exception):
    """Raised inside a worker whose cell has already timed out."""


def _checkpoint(cancel: threading.Event) -> ProgressCallback:
    def check(done: int) -> None:
        if cancel.is_set():
            raise CellCancelled(f"cancelled after {done} iterations")

    return check


def _engine_runner(engine: BenchEngine, config: BenchmarkConfig) -> EngineRun:
    spec = config.model_spec

    def closed_form(dataset: Dataset, stream: RngStream, checkpoint: ProgressCallback) -> tuple[float, float]:
        result = fit_closed_form(dataset, spec, AteVariant.NB)
        return result.mean, result.sd

    def approx(dataset: Dataset, stream: RngStream, checkpoint: ProgressCallback) -> tuple[float, float]:
        chain = run_chain(dataset, spec, GibbsConfig(config.iters, config.burn_in), stream.split(0), checkpoint)
        estimate = estimate_ate(dataset, chain, stream.split(1), spec, threads=1)
        return estimate.mean, estimate.sd

    def exact(dataset: Dataset, stream: RngStream, checkpoint: ProgressCallback) -> tuple[float, float]:
        chain = run_oracle(dataset, spec, config.oracle_config(), stream.split(0), checkpoint)
        estimate = estimate_ate(dataset, chain, stream.split(1), spec, threads=1)
        return estimate.mean, estimate.sd

    return {
        BenchEngine.CLOSED_FORM: closed_form,
        BenchEngine.APPROX: approx,
        BenchEngine.EXACT: exact,
    }[engine]


def _skip_reason(engine: BenchEngine, n: int, config: BenchmarkConfig) -> str | None:
    if engine is BenchEngine.CLOSED_FORM and config.sigma > 0:
        return "closed form needs sigma = 0"
    if engine is BenchEngine.EXACT and n > config.exact_max_n:
        return f"N above exact_max_n={config.exact_max_n}"
    return None


def run_cell(
    engine: BenchEngine,
    dataset: Dataset,
    stream: RngStream,
    config: BenchmarkConfig,
    replication: int,
) -> BenchmarkRow:
    """
    Run one engine on one dataset under the configured timeout.

    A timed-out sampler stops at its next progress checkpoint (every 100 Gibbs
    sweeps or 1000 oracle iterations) and the cell waits for it, so no worker
    outlives its cell. ``seconds`` is measured up to the timeout.
    """
    truth = true_ate(dataset)
    row = BenchmarkRow(n=dataset.N, engine=engine.value, replication=replication,
                       status=CellStatus.OK.value, true_ate=truth)
    reason = _skip_reason(engine, dataset.N, config)
    if reason:
        row.status = CellStatus.SKIPPED.value
        logger.info("Skipping %s at N=%d: %s", engine.value, dataset.N, reason)
        return row

    runner = _engine_runner(engine, config)
    cancel = threading.Event()
    executor = ThreadPoolExecutor(max_workers=1)
    start = time.perf_counter()
    try:
        future = executor.submit(runner, dataset, stream, _checkpoint(cancel))
        mean, sd = future.result(timeout=config.timeout)
    except FutureTimeout:
        row.status = CellStatus.TIMEOUT.value
        logger.warning("%s timed out at N=%d replication %d", engine.value, dataset.N, replication)
    except CountateError as e:
        row.status = CellStatus.FAILED.value
        logger.warning("%s failed at N=%d replication %d: %s", engine.value, dataset.N, replication, e)
    else:
        row.ate_mean, row.ate_sd = mean, sd
        row.abs_error = abs(mean - truth)
    finally:
        row.seconds = time.perf_counter() - start
        cancel.set()
        executor.shutdown(wait=True, cancel_futures=True)
    return row


def run_benchmark(
    config: BenchmarkConfig,
    progress: Callable[[BenchmarkRow], None] | None = None,
) -> BenchmarkResult:
    """
    Sweep the N grid. Dataset (i, r) draws from stream ``(seed, i, r, 0)`` and each
    engine from its own child of that stream, so estimates are reproducible.
    """
    master = RngStream(config.seed)
    result = BenchmarkResult(config=config)
    for i, n in enumerate(config.n_grid):
        sim = SimSpec(model=config.model, n=int(n), overdispersion_sigma=config.sigma, seed=config.seed)
        for r in range(config.replications):
            cell = master.split(i, r)
            dataset = generate(sim, cell.split(0))
            for engine in config.engines:
                slot = 1 + list(BenchEngine).index(engine)
                row = run_cell(engine, dataset, cell.split(slot), config, r)
                result.rows.append(row)
                if progress is not None:
                    progress(row)
    return result


def parse_engines(names: Sequence[str]) -> tuple[BenchEngine, ...]:
    """Map engine names to BenchEngine, rejecting unknown names."""
    allowed = [e.value for e in BenchEngine]
    engines = []
    for name in names:
        if name not in allowed:
            raise ValidationError(f"Unknown engine '{name}'. Must be one of: {', '.join(allowed)}")
        engines.append(BenchEngine(name))
    return tuple(engines)
