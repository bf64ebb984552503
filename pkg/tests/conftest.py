import hashlib
import json
import os
from pathlib import Path

import numpy as np
import pytest

from levyrotor import __version__
from levyrotor.config import config_hash
from levyrotor.harness import EnsembleResult, ExperimentConfig, log_sample_times, run_ensemble

# Optional on-disk cache for the long acceptance ensembles (development only).
CACHE_ENV = "LEVYROTOR_TEST_CACHE"

_session = {}


def _source_digest() -> str:
    src = Path(__file__).resolve().parents[1] / "src" / "levyrotor"
    h = hashlib.sha256()
    for name in ("rotor.py", "renewal.py", "harness.py"):
        p = src / name
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def cached_ensemble(config: ExperimentConfig) -> EnsembleResult:
    key = config_hash(config)
    if key in _session:
        return _session[key]
    cache_dir = os.environ.get(CACHE_ENV)
    path = None
    if cache_dir:
        path = Path(cache_dir) / f"{key}-{__version__}-{_source_digest()}.npz"
        if path.exists():
            d = np.load(path, allow_pickle=False)
            res = EnsembleResult(d["times"], d["mean"], d["stderr"], d["ok"],
                                 json.loads(str(d["failures"])), config, int(d["M"]))
            _session[key] = res
            return res
    res = run_ensemble(config)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, times=res.times, mean=res.mean, stderr=res.stderr, ok=res.ok,
                 failures=json.dumps({str(k): v for k, v in res.failures.items()}), M=res.M)
    _session[key] = res
    return res


# Lattice for the long runs: localized states carry exponential tails out to several
# thousand momentum quanta, so 4096 states leak; 32768 keeps the guard band clean.
ACCEPT_M = 32768


def noiseless_config() -> ExperimentConfig:
    return ExperimentConfig(kappa=0.0, T=5000, n_realizations=1, M=ACCEPT_M, precision="double",
                            theory=False, leak_threshold=1e-8)


def subdiffusion_config() -> ExperimentConfig:
    times = tuple(sorted(set(log_sample_times(10_000)) | {2048}))
    return ExperimentConfig(alpha=0.5, kappa=1 / 300, T=10_000, n_realizations=200, base_seed=11,
                            M=ACCEPT_M, precision="single", sample_times=times)


def diffusive_config() -> ExperimentConfig:
    return ExperimentConfig(alpha=1.5, kappa=1 / 300, T=4096, n_realizations=50, base_seed=12,
                            M=ACCEPT_M, precision="single")


def stationary_config() -> ExperimentConfig:
    return ExperimentConfig(dist="deterministic", kappa=1 / 300, T=10_000, n_realizations=20, base_seed=13,
                            M=ACCEPT_M, precision="single")


ORDERING_T = 2048


def ordering_config(alpha: float, kappa: float) -> ExperimentConfig:
    return ExperimentConfig(alpha=alpha, kappa=kappa, T=ORDERING_T, n_realizations=50, base_seed=14,
                            M=ACCEPT_M, precision="single")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_report_header(config):
    return f"levyrotor {__version__}; acceptance cache: {os.environ.get(CACHE_ENV) or 'off'}"


@pytest.fixture(scope="session")
def ensembles():
    return cached_ensemble
