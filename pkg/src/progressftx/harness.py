"""Experiment harness: config files, seeded sweeps, CSV emission.

A sweep runs ``trials`` independent episodes per (scheme, grid point) and
aggregates them.  Cost values ``c0`` form the grid for the feedback
schemes; uncertainty requirements ``h0`` form the grid for one-shot
compression.  Every trial draws its generator from ``(master seed, scheme
index, point index, trial index)``, so results are identical regardless of
how many workers execute the points.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import statmodel
from .channel import ChannelModel, FadingChannel, GaussianChannel
from .gains import build_gain_table
from .protocol import (OneShotCompression, ProgressFtx, RandomFeatureStopping,
                       SchemeKind, metrics, run_trial)
from .statmodel import GmModel, default_gain_profile, load_model, synth_model
from .stopping import StoppingPolicy

_SCHEME_NAMES = ("progressftx", "random", "oneshot")

_DEFAULTS: dict[str, str] = {
    "L": "2",
    "N": "40",
    "gain_coeff": "1.4",
    "gain_decay": "0.90",
    "model_file": "",
    "channel": "gaussian",
    "bandwidth_hz": "20000",
    "slot_s": "0.01",
    "snr_db": "4",
    "bits_per_feature": "64",
    "features_per_slot": "5",
    "outage_prob": "0.1",
    "horizon": "5",
    "h_tgt": "",
    "schemes": "progressftx,random,oneshot",
    "c0_grid": "0.45,0.32,0.22,0.14,0.08,0.04,0.015",
    "h0_grid": "0.5,0.42,0.35,0.29,0.245,0.21,0.183,0.155",
    "trials": "1000",
    "seed": "1",
    "out": "sweep.csv",
    "workers": "1",
}


class ConfigError(ValueError):
    """Raised on malformed experiment configuration, with line diagnostics."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated sweep description."""

    L: int
    N: int
    gain_coeff: float
    gain_decay: float
    model_file: str
    channel: str
    bandwidth_hz: float
    slot_s: float
    snr_db: float
    bits_per_feature: int
    features_per_slot: int
    outage_prob: float
    horizon: int
    h_tgt: float | None
    schemes: tuple[str, ...]
    c0_grid: tuple[float, ...]
    h0_grid: tuple[float, ...]
    trials: int
    seed: int
    out: str
    workers: int

    def config_hash(self) -> str:
        blob = "\n".join(f"{k}={getattr(self, k)}" for k in sorted(_DEFAULTS))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def build_model(self) -> GmModel:
        if self.model_file:
            return load_model(self.model_file)
        profile = default_gain_profile(self.N, self.gain_coeff, self.gain_decay)
        return synth_model(self.L, self.N, profile)

    def build_channel(self) -> ChannelModel:
        if self.channel == "fading":
            return FadingChannel(features_per_slot=self.features_per_slot,
                                 outage_prob=self.outage_prob)
        return GaussianChannel.from_snr_db(self.bandwidth_hz, self.slot_s,
                                           self.snr_db, self.bits_per_feature)


def _parse_kv_text(text: str, source: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def _to_float_list(value: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {exc}") from None


def config_from_mapping(values: dict[str, str], source: str = "<config>") -> ExperimentConfig:
    merged = dict(_DEFAULTS)
    merged.update(values)

    def geti(key):
        try:
            return int(merged[key])
        except ValueError:
            raise ConfigError(f"{source}: key {key!r}: expected integer, "
                              f"got {merged[key]!r}") from None

    def getf(key):
        try:
            return float(merged[key])
        except ValueError:
            raise ConfigError(f"{source}: key {key!r}: expected number, "
                              f"got {merged[key]!r}") from None

    schemes = tuple(s.strip() for s in merged["schemes"].split(",") if s.strip())
    for s in schemes:
        if s not in _SCHEME_NAMES:
            raise ConfigError(f"{source}: unknown scheme {s!r}; "
                              f"choose from {_SCHEME_NAMES}")
    if not schemes:
        raise ConfigError(f"{source}: schemes list is empty")
    if merged["channel"] not in ("gaussian", "fading"):
        raise ConfigError(f"{source}: channel must be 'gaussian' or 'fading'")

    cfg = ExperimentConfig(
        L=geti("L"), N=geti("N"),
        gain_coeff=getf("gain_coeff"), gain_decay=getf("gain_decay"),
        model_file=merged["model_file"],
        channel=merged["channel"],
        bandwidth_hz=getf("bandwidth_hz"), slot_s=getf("slot_s"),
        snr_db=getf("snr_db"), bits_per_feature=geti("bits_per_feature"),
        features_per_slot=geti("features_per_slot"),
        outage_prob=getf("outage_prob"),
        horizon=geti("horizon"),
        h_tgt=getf("h_tgt") if merged["h_tgt"] else None,
        schemes=schemes,
        c0_grid=_to_float_list(merged["c0_grid"], "c0_grid"),
        h0_grid=_to_float_list(merged["h0_grid"], "h0_grid"),
        trials=geti("trials"),
        seed=geti("seed"),
        out=merged["out"],
        workers=geti("workers"),
    )
    if cfg.trials < 1:
        raise ConfigError(f"{source}: trials must be >= 1")
    if cfg.workers < 1:
        raise ConfigError(f"{source}: workers must be >= 1")
    needs_c0 = any(s in ("progressftx", "random") for s in cfg.schemes)
    if needs_c0 and not cfg.c0_grid:
        raise ConfigError(f"{source}: c0_grid must be non-empty for feedback schemes")
    if "oneshot" in cfg.schemes and not cfg.h0_grid:
        raise ConfigError(f"{source}: h0_grid must be non-empty for oneshot")
    if cfg.model_file and not Path(cfg.model_file).exists():
        raise ConfigError(f"{source}: model_file {cfg.model_file!r} does not exist")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a flat key = value config file; unknown keys are hard errors."""
    text = Path(path).read_text()
    return config_from_mapping(_parse_kv_text(text, str(path)), str(path))


# ---------------------------------------------------------------------------
# Sweep execution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    scheme: str
    c0: float | None
    h0: float | None
    h_tgt: float | None
    trials: int
    latency_mean: float
    latency_stderr: float
    accuracy: float
    entropy_mean: float
    outage_rate: float
    seed: int
    config_hash: str
    tx_prob: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    gains: tuple[float, ...]


def _make_scheme(name: str, h0: float | None) -> SchemeKind:
    if name == "progressftx":
        return ProgressFtx()
    if name == "random":
        return RandomFeatureStopping()
    return OneShotCompression(h0=h0)


def _point_jobs(cfg: ExperimentConfig):
    jobs = []
    for si, scheme_name in enumerate(cfg.schemes):
        grid = cfg.h0_grid if scheme_name == "oneshot" else cfg.c0_grid
        for pi, value in enumerate(grid):
            jobs.append((si, scheme_name, pi, value))
    return jobs


def _run_point(cfg: ExperimentConfig, si: int, scheme_name: str, pi: int,
               value: float) -> SweepRow:
    model = cfg.build_model()
    table = build_gain_table(model)
    ch = cfg.build_channel()
    if scheme_name == "oneshot":
        c0, h0 = None, value
        policy = StoppingPolicy(cost_per_slot=1.0, horizon=cfg.horizon,
                                uncertainty_target=None)
    else:
        c0, h0 = value, None
        policy = StoppingPolicy(cost_per_slot=value, horizon=cfg.horizon,
                                uncertainty_target=cfg.h_tgt)
    scheme = _make_scheme(scheme_name, h0)

    del si  # kept in the job tuple for ordering only
    logs = []
    for t in range(cfg.trials):
        # seeds keyed by (point, trial) but not scheme: schemes see the same
        # sample paths per grid point, which pairs the curve comparisons
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(pi, t)))
        sam = statmodel.sample(model, rng)
        logs.append(run_trial(sam, model, table, ch, policy, scheme, rng))
    agg = metrics(logs, model)
    return SweepRow(
        scheme=scheme_name, c0=c0, h0=h0, h_tgt=cfg.h_tgt, trials=cfg.trials,
        latency_mean=agg.latency_mean, latency_stderr=agg.latency_stderr,
        accuracy=agg.accuracy, entropy_mean=agg.entropy_mean,
        outage_rate=agg.outage_rate, seed=cfg.seed,
        config_hash=cfg.config_hash(), tx_prob=tuple(agg.tx_prob),
    )


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> SweepResult:
    """Run every (scheme, grid point) and aggregate per point.

    The output is a pure function of (config, seed); the worker count only
    affects wall-clock time.
    """
    model = cfg.build_model()
    table = build_gain_table(model)
    jobs = _point_jobs(cfg)
    workers = cfg.workers if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_point, cfg, *job) for job in jobs]
            rows = [f.result() for f in futures]
    else:
        rows = [_run_point(cfg, *job) for job in jobs]
    return SweepResult(rows=tuple(rows), gains=tuple(table.per_dim))


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

_CSV_COLUMNS = ("scheme", "c0", "h0", "h_tgt", "trials", "latency_mean",
                "latency_stderr", "accuracy", "entropy_mean", "outage_rate",
                "seed", "config_hash")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def companion_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_txprob" + (p.suffix or ".csv"))


def emit_csv(result: SweepResult, path: str | Path) -> None:
    """Write the sweep table plus a per-dimension companion file.

    The companion file holds one row per (sweep row, dimension) with the
    dimension's gain and its transmission probability, in the same row
    order as the main file.
    """
    lines = [",".join(_CSV_COLUMNS)]
    for row in result.rows:
        lines.append(",".join(_fmt(getattr(row, col)) for col in _CSV_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")

    comp = ["scheme,c0,h0,dim,gain,tx_prob"]
    for row in result.rows:
        if row.tx_prob is None:
            continue
        for dim, (g, p) in enumerate(zip(result.gains, row.tx_prob), start=1):
            comp.append(f"{row.scheme},{_fmt(row.c0)},{_fmt(row.h0)},"
                        f"{dim},{_fmt(g)},{_fmt(p)}")
    companion_path(path).write_text("\n".join(comp) + "\n")


def load_csv(path: str | Path) -> SweepResult:
    """Read back a sweep written by :func:`emit_csv` (companion included)."""
    main = Path(path).read_text().strip().splitlines()
    if main[0] != ",".join(_CSV_COLUMNS):
        raise ValueError(f"{path}: unexpected header {main[0]!r}")

    gains: list[float] = []
    tx_by_row: list[list[float]] = []
    comp_file = companion_path(path)
    if comp_file.exists():
        comp = comp_file.read_text().strip().splitlines()[1:]
        current: list[float] = []
        for line in comp:
            parts = line.split(",")
            dim = int(parts[3])
            if dim == 1 and current:
                tx_by_row.append(current)
                current = []
            if len(tx_by_row) == 0 and dim > len(gains):
                gains.append(float(parts[4]))
            current.append(float(parts[5]))
        if current:
            tx_by_row.append(current)

    rows = []
    for i, line in enumerate(main[1:]):
        parts = line.split(",")
        rec = dict(zip(_CSV_COLUMNS, parts))
        rows.append(SweepRow(
            scheme=rec["scheme"],
            c0=float(rec["c0"]) if rec["c0"] else None,
            h0=float(rec["h0"]) if rec["h0"] else None,
            h_tgt=float(rec["h_tgt"]) if rec["h_tgt"] else None,
            trials=int(rec["trials"]),
            latency_mean=float(rec["latency_mean"]),
            latency_stderr=float(rec["latency_stderr"]),
            accuracy=float(rec["accuracy"]),
            entropy_mean=float(rec["entropy_mean"]),
            outage_rate=float(rec["outage_rate"]),
            seed=int(rec["seed"]),
            config_hash=rec["config_hash"],
            tx_prob=tuple(tx_by_row[i]) if i < len(tx_by_row) else None,
        ))
    return SweepResult(rows=tuple(rows), gains=tuple(gains))
