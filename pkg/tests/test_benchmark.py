"""
Tests for the benchmark sweep.

"Parallelism is just organized chaos. But faster." — schema.cx
"""

import math
import threading
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from countate import benchmark
from countate.benchmark import (
    ROW_COLUMNS,
    BenchEngine,
    BenchmarkConfig,
    BenchmarkRow,
    CellCancelled,
    CellStatus,
    _checkpoint,
    parse_engines,
    run_benchmark,
    run_cell,
)
from countate.closed_form import AteVariant, fit_closed_form
from countate.gibbs import GibbsConfig, ProgressCallback, run_chain
from countate.imputation import estimate_ate
from countate.models import Dataset, ModelSpec, Overdispersion
from countate.oracle import OracleConfig, batch_means_mcse, run_oracle
from countate.random_streams import RngStream
from countate.synthetic import SimModel, SimSpec, generate
from countate.validation import NumericalError, ValidationError


@pytest.fixture
def small_config() -> BenchmarkConfig:
    """A quick sweep: two sizes, two replications, all three engines."""
    return BenchmarkConfig(
        n_grid=(20, 40),
        replications=2,
        engines=(BenchEngine.CLOSED_FORM, BenchEngine.APPROX, BenchEngine.EXACT),
        iters=120,
        burn_in=20,
        oracle_iters=500,
        exact_max_n=30,
        timeout=None,
        seed=4,
    )


@pytest.fixture
def sim_dataset() -> Dataset:
    return generate(SimSpec(n=20, seed=8))


class TestBenchmarkConfig:
    """Tests for BenchmarkConfig."""

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"replications": 0}, "replications"),
            ({"n_grid": (21,)}, "even"),
            ({"engines": ()}, "At least one engine"),
            ({"timeout": 0.0}, "timeout"),
            ({"iters": 10, "burn_in": 20}, "burn_in"),
        ],
    )
    def test_invalid(self, kwargs: dict, message: str) -> None:
        """Test validation of the sweep settings."""
        with pytest.raises(ValidationError, match=message):
            BenchmarkConfig(**kwargs)

    def test_model_spec_follows_sigma(self) -> None:
        """Test that sigma > 0 switches to the lognormal-Poisson model."""
        assert BenchmarkConfig().model_spec.overdispersion is Overdispersion.POISSON
        assert BenchmarkConfig(sigma=0.3).model_spec.overdispersion is Overdispersion.LOGNORMAL_POISSON

    def test_to_dict(self) -> None:
        """Test that enums and tuples are plain values."""
        data = BenchmarkConfig().to_dict()
        assert data["engines"] == ["closed-form", "approx"]
        assert data["n_grid"] == [500, 1000]
        assert data["model"] == "simple"

    def test_oracle_burn_in(self) -> None:
        """Test the default fifth and an explicit oracle burn-in."""
        assert BenchmarkConfig(oracle_iters=1000).oracle_config().burn_in == 200
        assert BenchmarkConfig(oracle_iters=1000, oracle_burn_in=0).oracle_config().burn_in == 0
        with pytest.raises(ValidationError, match="burn_in"):
            BenchmarkConfig(oracle_iters=1000, oracle_burn_in=1000)


class TestRunCell:
    """Tests for run_cell."""

    def test_closed_form_ok(self, small_config: BenchmarkConfig, sim_dataset: Dataset) -> None:
        """Test a completed cell with an absolute error."""
        row = run_cell(BenchEngine.CLOSED_FORM, sim_dataset, RngStream(0), small_config, 0)

        assert row.status == CellStatus.OK.value
        assert row.ate_mean is not None and row.true_ate is not None
        assert row.abs_error == pytest.approx(abs(row.ate_mean - row.true_ate))
        assert row.seconds is not None and row.seconds >= 0.0

    def test_closed_form_skipped_when_overdispersed(self, sim_dataset: Dataset) -> None:
        """Test that the closed form is skipped for sigma > 0."""
        config = BenchmarkConfig(sigma=0.2)
        row = run_cell(BenchEngine.CLOSED_FORM, sim_dataset, RngStream(0), config, 0)
        assert row.status == CellStatus.SKIPPED.value
        assert row.ate_mean is None

    def test_exact_skipped_above_limit(self, small_config: BenchmarkConfig) -> None:
        """Test the exact_max_n cut-off."""
        ds = generate(SimSpec(n=40, seed=1))
        row = run_cell(BenchEngine.EXACT, ds, RngStream(0), small_config, 1)
        assert row.status == CellStatus.SKIPPED.value

    def test_timeout(self, sim_dataset: Dataset) -> None:
        """Test that an engine over the time limit is recorded as a timeout."""
        config = BenchmarkConfig(iters=5000, burn_in=100, timeout=1e-6)
        row = run_cell(BenchEngine.APPROX, sim_dataset, RngStream(0), config, 0)
        assert row.status == CellStatus.TIMEOUT.value
        assert row.ate_mean is None

    def test_failure(
        self, small_config: BenchmarkConfig, sim_dataset: Dataset, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test that a library error marks the cell failed without raising."""

        def broken(engine: BenchEngine, config: BenchmarkConfig):
            def run(dataset: Dataset, stream: RngStream, checkpoint: ProgressCallback) -> tuple[float, float]:
                raise NumericalError("overflow")

            return run

        monkeypatch.setattr(benchmark, "_engine_runner", broken)
        row = run_cell(BenchEngine.APPROX, sim_dataset, RngStream(0), small_config, 0)
        assert row.status == CellStatus.FAILED.value

    def test_timed_out_worker_stops(
        self, small_config: BenchmarkConfig, sim_dataset: Dataset, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test that a timed-out engine is cancelled at its next checkpoint before the cell returns."""
        stopped = threading.Event()

        def endless(engine: BenchEngine, config: BenchmarkConfig):
            def run(dataset: Dataset, stream: RngStream, checkpoint: ProgressCallback) -> tuple[float, float]:
                try:
                    done = 0
                    while True:
                        time.sleep(0.001)
                        done += 1
                        checkpoint(done)
                finally:
                    stopped.set()

            return run

        monkeypatch.setattr(benchmark, "_engine_runner", endless)
        config = replace(small_config, timeout=0.05)
        row = run_cell(BenchEngine.APPROX, sim_dataset, RngStream(0), config, 0)

        assert row.status == CellStatus.TIMEOUT.value
        assert stopped.is_set()

    def test_checkpoint(self) -> None:
        """Test that the checkpoint only raises once its cell is cancelled."""
        cancel = threading.Event()
        check = _checkpoint(cancel)
        check(100)
        cancel.set()
        with pytest.raises(CellCancelled, match="200"):
            check(200)


class TestRunBenchmark:
    """Tests for run_benchmark."""

    def test_rows_and_summary(self, small_config: BenchmarkConfig) -> None:
        """Test row order, skips and the per-(N, engine) summary."""
        seen: list[BenchmarkRow] = []
        result = run_benchmark(small_config, progress=seen.append)
        frame = result.to_frame()

        assert len(result.rows) == 2 * 2 * 3
        assert len(seen) == len(result.rows)
        assert list(frame.columns) == ROW_COLUMNS
        assert frame["engine"].tolist()[:3] == ["closed-form", "approx", "exact"]
        exact_40 = frame[(frame["n"] == 40) & (frame["engine"] == "exact")]
        assert set(exact_40["status"]) == {"skipped"}

        summary = result.summary()
        assert len(summary) == 5
        assert (summary["cells"] == 2).all()
        assert (summary["mae"] >= 0).all()

    def test_reproducible(self) -> None:
        """Test identical estimates for one seed."""
        config = BenchmarkConfig(
            n_grid=(20,), replications=2, engines=(BenchEngine.APPROX,), iters=120, burn_in=20,
            timeout=None, seed=4,
        )
        a = run_benchmark(config).to_frame()["ate_mean"].to_numpy()
        b = run_benchmark(config).to_frame()["ate_mean"].to_numpy()
        np.testing.assert_array_equal(a, b)

    def test_engine_streams_independent_of_selection(self) -> None:
        """Test that adding an engine does not change another engine's estimates."""
        base = dict(n_grid=(20,), replications=1, iters=120, burn_in=20, timeout=None, seed=2)
        alone = run_benchmark(BenchmarkConfig(engines=(BenchEngine.APPROX,), **base))
        both = run_benchmark(BenchmarkConfig(engines=(BenchEngine.CLOSED_FORM, BenchEngine.APPROX), **base))
        assert alone.rows[0].ate_mean == both.rows[1].ate_mean

    def test_empty_summary(self) -> None:
        """Test the summary when nothing completed."""
        config = BenchmarkConfig(n_grid=(20,), replications=1, engines=(BenchEngine.CLOSED_FORM,), sigma=0.2)
        summary = run_benchmark(config).summary()
        assert summary.empty
        assert "mae" in summary.columns

    def test_write_csv(self, tmp_path: Path) -> None:
        """Test the results CSV."""
        config = BenchmarkConfig(n_grid=(20,), replications=1, engines=(BenchEngine.CLOSED_FORM,))
        path = run_benchmark(config).write_csv(tmp_path / "bench" / "rows.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ROW_COLUMNS
        assert len(frame) == 1


class TestParseEngines:
    """Tests for parse_engines."""

    def test_known(self) -> None:
        """Test mapping names in order."""
        assert parse_engines(["exact", "approx"]) == (BenchEngine.EXACT, BenchEngine.APPROX)

    def test_unknown(self) -> None:
        """Test that an unknown name is rejected."""
        with pytest.raises(ValidationError, match="Unknown engine"):
            parse_engines(["mcmc"])


def _effective_draws(draws: np.ndarray) -> float:
    """Smallest batch-means effective sample size over the β coordinates."""
    return float(np.min(draws.var(axis=0, ddof=1) / batch_means_mcse(draws) ** 2))


class TestPerformance:
    """Wall-clock checks at the sizes of the timing study."""

    @pytest.mark.slow
    def test_closed_form_complex_model(self) -> None:
        """Test the closed form on the complex model at N=100 000 within 10 seconds."""
        dataset = generate(SimSpec(model=SimModel.COMPLEX, n=100_000, seed=5))
        start = time.perf_counter()
        result = fit_closed_form(dataset, ModelSpec(), AteVariant.NB)
        elapsed = time.perf_counter() - start

        assert math.isfinite(result.mean)
        assert elapsed <= 10.0

    @pytest.mark.slow
    def test_lognormal_poisson_gibbs(self) -> None:
        """Test 1000 retained lognormal-Poisson draws and their imputations at N=10 000 within 60 seconds."""
        dataset = generate(SimSpec(n=10_000, overdispersion_sigma=0.5, seed=6))
        spec = ModelSpec(overdispersion=Overdispersion.LOGNORMAL_POISSON)
        start = time.perf_counter()
        chain = run_chain(dataset, spec, GibbsConfig(iterations=1200, burn_in=200), RngStream(6, (0,)))
        estimate = estimate_ate(dataset, chain, RngStream(6, (1,)), spec, threads=1)
        elapsed = time.perf_counter() - start

        assert estimate.R == 1000
        assert elapsed <= 60.0

    @pytest.mark.slow
    def test_approx_beats_exact(self) -> None:
        """Test that the Gaussian sampler is at least 10× cheaper per effective draw than the exact one at N=10 000."""
        dataset = generate(SimSpec(n=10_000, seed=7))
        spec = ModelSpec()

        start = time.perf_counter()
        approx = run_chain(dataset, spec, GibbsConfig(iterations=1200, burn_in=200), RngStream(7, (0,)))
        approx_cost = (time.perf_counter() - start) / _effective_draws(approx.beta)

        start = time.perf_counter()
        exact = run_oracle(dataset, spec, OracleConfig(iterations=6000, burn_in=1000), RngStream(7, (1,)))
        exact_cost = (time.perf_counter() - start) / _effective_draws(exact.beta)

        assert exact_cost >= 10.0 * approx_cost

    @pytest.mark.slow
    def test_approx_engine_scales_linearly(self) -> None:
        """Test a log-log slope of the approx engine's wall-clock against N within [0.8, 1.2]."""
        config = BenchmarkConfig(engines=(BenchEngine.APPROX,), iters=400, burn_in=100, timeout=None)
        sizes = np.array([8_000, 16_000, 32_000, 64_000])
        seconds = []
        for n in sizes:
            dataset = generate(SimSpec(n=int(n), seed=3))
            runs = [run_cell(BenchEngine.APPROX, dataset, RngStream(3, (r,)), config, r) for r in range(3)]
            assert all(row.status == CellStatus.OK.value for row in runs)
            seconds.append(min(row.seconds for row in runs if row.seconds is not None))

        slope, _ = np.polyfit(np.log(sizes), np.log(seconds), 1)
        assert 0.8 <= slope <= 1.2
