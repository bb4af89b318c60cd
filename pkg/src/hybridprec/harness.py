"""
Monte Carlo spectral-efficiency experiments.

Every trial draws one channel from its own seed stream and evaluates all
configured strategies on it at every SNR point, so strategy comparisons are
paired.  Trial ``i`` uses ``SeedSequence(root_seed, spawn_key=(i, 0))`` for
the channel and ``spawn_key=(i, 1)`` for covariance samples; results do not
depend on trial order or thread count.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .channel import ArrayGeometry, generate_channel, redraw_gains, sample_covariance
from .digital_design import design_digital, effective_channel, zf_precoder
from .errors import ConfigError
from .precoding import SnrPoint, fully_digital_rf, make_hybrid, sum_se
from .rf_design import (
    covariance_basis,
    dynamic_subarray_rf,
    fixed_subarray_rf,
    left_singular_basis,
    rf_from_channel_phases,
    rf_from_covariance,
    rf_from_left_singular,
)

__all__ = [
    "STRATEGIES",
    "SUBARRAY_STRATEGIES",
    "COVARIANCE_STRATEGIES",
    "SystemConfig",
    "ExperimentResult",
    "TrialInputs",
    "trial_inputs",
    "build_rf",
    "strategy_build",
    "run_experiment",
    "emit_csv",
    "read_csv",
    "parse_snr_range",
    "CSV_HEADER",
]

logger = logging.getLogger(__name__)

FULLY_DIGITAL_WMMSE = "fully-digital-wmmse"
PROPOSED_FC = "proposed-fc"
PROPOSED_FIXED = "proposed-fixed"
PROPOSED_DYNAMIC = "proposed-dynamic"
PROPOSED_COV_FC = "proposed-cov-fc"
PROPOSED_COV_FIXED = "proposed-cov-fixed"
PROPOSED_COV_DYNAMIC = "proposed-cov-dynamic"
ARGH_BASELINE = "argH-rf-baseline"
ZF_FULLY_DIGITAL = "zf-fully-digital"

STRATEGIES = (
    FULLY_DIGITAL_WMMSE,
    PROPOSED_FC,
    PROPOSED_FIXED,
    PROPOSED_DYNAMIC,
    PROPOSED_COV_FC,
    PROPOSED_COV_FIXED,
    PROPOSED_COV_DYNAMIC,
    ARGH_BASELINE,
    ZF_FULLY_DIGITAL,
)
SUBARRAY_STRATEGIES = frozenset({PROPOSED_FIXED, PROPOSED_DYNAMIC, PROPOSED_COV_FIXED, PROPOSED_COV_DYNAMIC})
COVARIANCE_STRATEGIES = frozenset({PROPOSED_COV_FC, PROPOSED_COV_FIXED, PROPOSED_COV_DYNAMIC})

CSV_HEADER = ("strategy", "snr_db", "mean_sum_se", "std_sum_se", "trials", "mean_build_seconds")


@dataclass
class SystemConfig:
    num_antennas: int = 32
    num_users: int = 4
    num_rf_chains: int = 4
    num_paths: int = 4
    spacing_ratio: float = 0.5
    snr_grid_db: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    num_trials: int = 500
    root_seed: int = 0
    t_max: int = 30
    epsilon: float = 0.01
    strategies: tuple = (FULLY_DIGITAL_WMMSE, PROPOSED_FC, PROPOSED_DYNAMIC, PROPOSED_FIXED, ARGH_BASELINE)
    covariance_samples: Optional[int] = None

    def __post_init__(self):
        self.snr_grid_db = tuple(float(x) for x in self.snr_grid_db)
        self.strategies = tuple(self.strategies)

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.num_antennas, self.spacing_ratio)

    def validate(self) -> "SystemConfig":
        """Raise ``ConfigError`` naming the first violated constraint."""
        n, k, n_rf = self.num_antennas, self.num_users, self.num_rf_chains
        for name in ("num_antennas", "num_users", "num_rf_chains", "num_paths", "num_trials", "t_max"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not n >= n_rf:
            raise ConfigError(f"need num_antennas >= num_rf_chains, got N={n}, N_RF={n_rf}")
        if not (math.isfinite(self.spacing_ratio) and self.spacing_ratio > 0):
            raise ConfigError(f"spacing_ratio must be positive, got {self.spacing_ratio!r}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.snr_grid_db or not all(math.isfinite(x) for x in self.snr_grid_db):
            raise ConfigError("snr_grid_db must be a non-empty list of finite values")
        if not 0 <= self.root_seed < 2**64:
            raise ConfigError(f"root_seed must be a 64-bit unsigned integer, got {self.root_seed!r}")
        unknown = [s for s in self.strategies if s not in STRATEGIES]
        if unknown:
            raise ConfigError(f"unknown strategies {unknown}; known: {', '.join(STRATEGIES)}")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("strategies must not repeat")
        subarray = [s for s in self.strategies if s in SUBARRAY_STRATEGIES]
        if subarray and n % n_rf != 0:
            raise ConfigError(
                f"subarray strategies {subarray} require num_antennas divisible by num_rf_chains "
                f"(N={n}, N_RF={n_rf}, N mod N_RF = {n % n_rf})"
            )
        if ARGH_BASELINE in self.strategies and n_rf != k:
            raise ConfigError(f"{ARGH_BASELINE} requires num_rf_chains == num_users (N_RF={n_rf}, K={k})")
        if ZF_FULLY_DIGITAL in self.strategies and k > n:
            raise ConfigError(f"{ZF_FULLY_DIGITAL} requires num_users <= num_antennas")
        cov = [s for s in self.strategies if s in COVARIANCE_STRATEGIES]
        if cov and (self.covariance_samples is None or self.covariance_samples < 1):
            raise ConfigError(f"covariance strategies {cov} require covariance_samples >= 1")
        return self

    # -- flat `key = value` text format ------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                text = ", ".join(_format_scalar(v) for v in value)
            else:
                text = _format_scalar(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SystemConfig":
        kwargs = {}
        types = {f.name: f for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                kwargs[key] = _parse_value(key, value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "SystemConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        return cls.from_text(text)


_INT_KEYS = {"num_antennas", "num_users", "num_rf_chains", "num_paths", "num_trials",
             "root_seed", "t_max", "covariance_samples"}
_FLOAT_KEYS = {"spacing_ratio", "epsilon"}


def _format_scalar(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(key: str, value: str):
    if key in _INT_KEYS:
        if value.lower() in ("", "none") and key == "covariance_samples":
            return None
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    items = [v.strip() for v in value.split(",") if v.strip()]
    if key == "snr_grid_db":
        return tuple(float(v) for v in items)
    return tuple(items)


def parse_snr_range(spec: str) -> tuple:
    """Parse ``start:step:stop`` (inclusive, dB) into a tuple of floats."""
    try:
        start, step, stop = (float(p) for p in spec.split(":"))
    except ValueError:
        raise ConfigError(f"SNR range must look like start:step:stop, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"SNR range {spec!r} needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 12) for i in range(count))


# -- strategies ----------------------------------------------------------


@dataclass
class TrialInputs:
    """Channel of one trial plus the lazily shared subspace bases."""

    channel: object
    covariance: object = None
    _bases: dict = field(default_factory=dict)

    def instantaneous_basis(self, m: int):
        key = ("svd", m)
        if key not in self._bases:
            self._bases[key] = left_singular_basis(self.channel, m)
        return self._bases[key]

    def covariance_basis(self, m: int):
        key = ("cov", m)
        if key not in self._bases:
            if self.covariance is None:
                raise ConfigError("covariance strategy used without covariance samples")
            self._bases[key] = covariance_basis(self.covariance, m)
        return self._bases[key]


def trial_inputs(config: SystemConfig, trial: int) -> TrialInputs:
    """Draw the channel (and, if needed, the sample covariance) of ``trial``."""
    geometry = config.geometry
    rng = np.random.default_rng(np.random.SeedSequence(config.root_seed, spawn_key=(trial, 0)))
    channel = generate_channel(geometry, config.num_users, config.num_paths, rng)
    covariance = None
    if any(s in COVARIANCE_STRATEGIES for s in config.strategies):
        cov_rng = np.random.default_rng(np.random.SeedSequence(config.root_seed, spawn_key=(trial, 1)))
        samples = [redraw_gains(channel, geometry, cov_rng) for _ in range(config.covariance_samples)]
        covariance = sample_covariance(samples)
    return TrialInputs(channel=channel, covariance=covariance)


def build_rf(name: str, inputs: TrialInputs, config: SystemConfig):
    """Analog stage of strategy ``name``; it does not depend on the SNR."""
    n_rf = config.num_rf_chains
    if name in (FULLY_DIGITAL_WMMSE, ZF_FULLY_DIGITAL):
        return fully_digital_rf(config.num_antennas)
    if name == PROPOSED_FC:
        return rf_from_left_singular(inputs.instantaneous_basis(n_rf))
    if name == PROPOSED_FIXED:
        return fixed_subarray_rf(inputs.instantaneous_basis(n_rf), n_rf)
    if name == PROPOSED_DYNAMIC:
        return dynamic_subarray_rf(inputs.instantaneous_basis(n_rf), n_rf)
    if name == PROPOSED_COV_FC:
        if inputs.covariance is None:
            raise ConfigError(f"{name} requires covariance samples")
        return rf_from_covariance(inputs.covariance, n_rf)
    if name == PROPOSED_COV_FIXED:
        return fixed_subarray_rf(inputs.covariance_basis(n_rf), n_rf)
    if name == PROPOSED_COV_DYNAMIC:
        return dynamic_subarray_rf(inputs.covariance_basis(n_rf), n_rf)
    if name == ARGH_BASELINE:
        return rf_from_channel_phases(inputs.channel, n_rf)
    raise ConfigError(f"unknown strategy {name!r}; known: {', '.join(STRATEGIES)}")


def _build_digital(name, rf, channel, snr, config):
    if name == ZF_FULLY_DIGITAL:
        return make_hybrid(rf, zf_precoder(effective_channel(rf, channel)))
    return design_digital(rf, channel, snr, t_max=config.t_max, epsilon=config.epsilon)


def strategy_build(name: str, inputs, config: SystemConfig, snr: SnrPoint, rf=None):
    """Power-normalized hybrid precoder of strategy ``name`` for one SNR point.

    ``inputs`` is a ``TrialInputs`` or a bare ``ChannelRealization``; the
    digital stage always uses the instantaneous channel.  A prebuilt ``rf``
    skips the analog stage.
    """
    if not isinstance(inputs, TrialInputs):
        inputs = TrialInputs(channel=inputs)
    if name not in STRATEGIES:
        raise ConfigError(f"unknown strategy {name!r}; known: {', '.join(STRATEGIES)}")
    if rf is None:
        rf = build_rf(name, inputs, config)
    return _build_digital(name, rf, inputs.channel, snr, config)


# -- experiment ----------------------------------------------------------


@dataclass
class ExperimentResult:
    """Per-(strategy, SNR) statistics of a run.

    Arrays are indexed ``[strategy, snr]``; ``samples`` is
    ``[trial, strategy, snr]`` and keeps the paired per-trial sum SE.
    """

    config: SystemConfig
    strategies: tuple
    snr_grid_db: tuple
    mean_sum_se: np.ndarray
    std_sum_se: np.ndarray
    trials: np.ndarray
    mean_build_seconds: np.ndarray
    samples: Optional[np.ndarray] = None
    version: str = __version__

    def rows(self):
        for i, s in enumerate(self.strategies):
            for j in np.argsort(self.snr_grid_db, kind="stable"):
                yield (s, self.snr_grid_db[j], float(self.mean_sum_se[i, j]), float(self.std_sum_se[i, j]),
                       int(self.trials[i, j]), float(self.mean_build_seconds[i, j]))

    def series(self, strategy: str) -> np.ndarray:
        """Per-trial sum SE of one strategy, shape (trials, snr points)."""
        return self.samples[:, self.strategies.index(strategy), :]


def _run_trial(config: SystemConfig, trial: int, timing: bool):
    inputs = trial_inputs(config, trial)
    snrs = [SnrPoint.from_db(db) for db in config.snr_grid_db]
    se = np.zeros((len(config.strategies), len(snrs)))
    seconds = np.zeros_like(se)
    clock = time.perf_counter if timing else (lambda: 0.0)
    for i, name in enumerate(config.strategies):
        t0 = clock()
        rf = build_rf(name, inputs, config)
        rf_seconds = clock() - t0
        for j, snr in enumerate(snrs):
            t0 = clock()
            precoder = strategy_build(name, inputs, config, snr, rf=rf)
            seconds[i, j] = rf_seconds + clock() - t0
            se[i, j] = sum_se(inputs.channel, precoder, snr)
    return se, seconds


def run_experiment(config: SystemConfig, threads: int = 1, timing: bool = True) -> ExperimentResult:
    """Run all trials and aggregate.

    With ``timing=False`` the build-time column is zero, which makes the
    whole result a deterministic function of the config.
    """
    config.validate()
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    logger.info("running %d trials x %d strategies x %d SNR points on %d thread(s)",
                config.num_trials, len(config.strategies), len(config.snr_grid_db), threads)

    def work(trial):
        return _run_trial(config, trial, timing)

    if threads == 1:
        outputs = [work(t) for t in range(config.num_trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(work, range(config.num_trials)))

    shape = (config.num_trials, len(config.strategies), len(config.snr_grid_db))
    samples = np.stack([o[0] for o in outputs]) if outputs else np.zeros(shape)
    seconds = np.stack([o[1] for o in outputs]) if outputs else np.zeros(shape)
    n = config.num_trials
    std = samples.std(axis=0, ddof=1) if n > 1 else np.zeros(shape[1:])
    return ExperimentResult(
        config=config,
        strategies=config.strategies,
        snr_grid_db=config.snr_grid_db,
        mean_sum_se=samples.mean(axis=0),
        std_sum_se=std,
        trials=np.full(shape[1:], n, dtype=int),
        mean_build_seconds=seconds.mean(axis=0),
        samples=samples,
    )


# -- CSV -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(x, ".12g")


def emit_csv(result: ExperimentResult, destination) -> None:
    """Write one row per (strategy, SNR): strategy order, then ascending SNR.

    ``destination`` is a path or a text stream.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s, db, mean, std, n, secs in result.rows():
        writer.writerow((s, _fmt(db), _fmt(mean), _fmt(std), n, _fmt(secs)))
    text = buf.getvalue()
    if hasattr(destination, "write"):
        destination.write(text)
        return
    try:
        Path(destination).write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write CSV to {destination}: {exc.strerror}") from exc


def read_csv(source) -> list:
    """Parse an emitted CSV back into a list of row dicts with numeric fields."""
    text = source.read() if hasattr(source, "read") else Path(source).read_text()
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    rows = []
    for row in reader:
        rows.append({
            "strategy": row["strategy"],
            "snr_db": float(row["snr_db"]),
            "mean_sum_se": float(row["mean_sum_se"]),
            "std_sum_se": float(row["std_sum_se"]),
            "trials": int(row["trials"]),
            "mean_build_seconds": float(row["mean_build_seconds"]),
        })
    return rows
