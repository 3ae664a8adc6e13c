"""Scenario x frequency x height sweeps along the UAV trajectory.

A campaign is described by flat ``key = value`` text (see :data:`KEYS`).
Every trajectory point is traced once per (scenario, height); the resulting
geometry is evaluated at every frequency.  Points are farmed out to a
process pool in fixed chunks and reassembled in index order, so the output
does not depend on the number of workers.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import CampaignError, ConfigError, GeometryError
from .metrics import Cir, EmpiricalCdf, RssTrace, empirical_cdf, narrowband_rss, rms_delay_spread
from .raytrace import TraceConfig, Tracer
from .scene import (FREQ_RANGE, TRAJECTORY_LENGTH, TRAJECTORY_START_OFFSET, TX_GROUND, TX_HEIGHT,
                    MaterialKind, ScenarioKind, bare_scene, default_trajectory, generate_scenario,
                    trajectory_samples)

MAX_INVALID_FRACTION = 0.05
CHUNK_SIZE = 64
RSS_HEADER = "distance_m,rss_dbm,num_paths,rms_ds_ns,los_blocked"
CDF_HEADER = "value_ns,probability"
BARE = "bare"


@dataclass(frozen=True)
class CampaignConfig:
    scenarios: tuple = tuple(ScenarioKind)
    seed: int = 1
    frequencies: tuple = (28e9, 60e9)
    heights: tuple = (2.0, 50.0, 100.0, 150.0)
    trajectory_length: float = TRAJECTORY_LENGTH
    trajectory_spacing: float = 1.0
    trajectory_start_offset: float = TRAJECTORY_START_OFFSET
    max_order: int = 2
    diffraction: bool = True
    dynamic_range_db: float = 30.0
    rmsds_cut_db: float = 25.0
    tx_power_dbm: float = 30.0
    tx_height: float = TX_HEIGHT
    bare_scene: bool = False
    bare_ground: MaterialKind = MaterialKind.DRY_GROUND
    output_dir: str = "campaign_out"
    workers: int = 1

    def __post_init__(self):
        for name in ("scenarios", "frequencies", "heights"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must not be empty")
        lo, hi = FREQ_RANGE
        for f in self.frequencies:
            if not lo <= f <= hi:
                raise ValueError(f"frequency {f:g} Hz outside [{lo:g}, {hi:g}] Hz")
        if any(h <= 0 for h in self.heights):
            raise ValueError("UAV heights must be positive")
        if self.tx_height <= 0:
            raise ValueError("tx_height must be positive")
        if self.trajectory_length < 0 or self.trajectory_spacing <= 0:
            raise ValueError("trajectory needs length >= 0 and spacing > 0")
        if self.trajectory_start_offset <= 0:
            raise ValueError("trajectory_start_offset must be positive")
        if self.rmsds_cut_db <= 0:
            raise ValueError("rmsds_cut_db must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.bare_ground is MaterialKind.FOLIAGE:
            raise ValueError("foliage cannot be used as ground material")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        self.trace_config()  # validates the tracer fields

    def trace_config(self) -> TraceConfig:
        return TraceConfig(self.max_order, self.diffraction, self.dynamic_range_db)

    @property
    def scenario_labels(self) -> tuple[str, ...]:
        return (BARE,) if self.bare_scene else tuple(s.value for s in self.scenarios)


# -- config text ----------------------------------------------------------------------

def _parse_bool(s):
    low = s.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int(s):
    v = float(s)
    if not v.is_integer():
        raise ValueError(f"not an integer: {s!r}")
    return int(v)


def _list(conv):
    def parse(s):
        items = [x.strip() for x in s.split(",")]
        if not items or any(x == "" for x in items):
            raise ValueError("empty list or list item")
        return tuple(conv(x) for x in items)
    return parse


def _fmt_float(v):
    return repr(float(v))


KEYS = {
    # key: (parser, formatter)
    "scenarios": (_list(ScenarioKind), lambda v: ",".join(s.value for s in v)),
    "seed": (_parse_int, str),
    "frequencies": (_list(float), lambda v: ",".join(_fmt_float(x) for x in v)),
    "heights": (_list(float), lambda v: ",".join(_fmt_float(x) for x in v)),
    "trajectory_length": (float, _fmt_float),
    "trajectory_spacing": (float, _fmt_float),
    "trajectory_start_offset": (float, _fmt_float),
    "max_order": (_parse_int, str),
    "diffraction": (_parse_bool, lambda v: "true" if v else "false"),
    "dynamic_range_db": (float, _fmt_float),
    "rmsds_cut_db": (float, _fmt_float),
    "tx_power_dbm": (float, _fmt_float),
    "tx_height": (float, _fmt_float),
    "bare_scene": (_parse_bool, lambda v: "true" if v else "false"),
    "bare_ground": (MaterialKind, lambda v: v.value),
    "output_dir": (str, str),
    "workers": (_parse_int, str),
}


def parse_config(text: str) -> CampaignConfig:
    """Parse ``key = value`` lines into a validated :class:`CampaignConfig`.

    ``#`` starts a comment; lists are comma-separated; unspecified keys take
    their defaults.  Errors carry the offending line number (0 for errors
    that only appear once all keys are combined).
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        if value == "":
            raise ConfigError(f"empty value for {key!r}", line=lineno)
        try:
            parsed = KEYS[key][0](value)
            # validate each field in isolation so the error points at its line
            CampaignConfig(**{key: parsed})
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{key}: {exc}", line=lineno) from None
        values[key] = parsed
    try:
        return CampaignConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc), line=0) from None


def format_config(cfg: CampaignConfig) -> str:
    """Config echo that :func:`parse_config` reads back to an equal config."""
    return "".join(f"{f.name} = {KEYS[f.name][1](getattr(cfg, f.name))}\n" for f in fields(cfg))


def config_hash(cfg: CampaignConfig) -> str:
    """Digest of the physics-relevant config (workers and output_dir excluded)."""
    text = "".join(line for line in format_config(cfg).splitlines(keepends=True)
                   if not line.startswith(("workers ", "output_dir ")))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- running --------------------------------------------------------------------------

@dataclass(frozen=True)
class CampaignResult:
    config: CampaignConfig
    traces: dict = field(repr=False)        # (scenario, f_c, height) -> RssTrace
    rmsds: dict = field(repr=False)         # (scenario, f_c, height) -> RMS-DS samples in s
    invalid: dict = field(repr=False)       # (scenario, height) -> invalid point indices
    seed: int = 0
    config_hash: str = ""

    def cdf(self, key) -> EmpiricalCdf | None:
        samples = self.rmsds[key]
        return empirical_cdf(samples * 1e9) if len(samples) else None


def _scene_for(cfg: CampaignConfig, label: str):
    if label == BARE:
        return bare_scene(cfg.bare_ground)
    return generate_scenario(ScenarioKind(label), cfg.seed)


_TRACERS: dict = {}


def _tracer(cfg: CampaignConfig, label: str) -> Tracer:
    # one tracer per scenario per process; beam precomputation is the costly part
    key = (config_hash(cfg), label)
    if key not in _TRACERS:
        tx = (TX_GROUND[0], TX_GROUND[1], cfg.tx_height)
        _TRACERS[key] = Tracer(_scene_for(cfg, label), tx, cfg.trace_config())
    return _TRACERS[key]


def _run_chunk(task):
    """Evaluate points ``[i0, i1)`` of one (scenario, height) trajectory."""
    cfg, label, height, i0, i1 = task
    tracer = _tracer(cfg, label)
    pts = _trajectory(cfg, height)[i0:i1]
    nf = len(cfg.frequencies)
    rss = np.full((nf, len(pts)), np.nan)
    ds = np.full((nf, len(pts)), np.nan)
    npaths = np.zeros((nf, len(pts)), dtype=int)
    blocked = np.ones(len(pts), dtype=bool)
    invalid = []
    for j, rx in enumerate(pts):
        try:
            geom = tracer.find_paths(rx)
        except (GeometryError, ValueError):
            invalid.append(i0 + j)
            continue
        blocked[j] = geom.los_blocked
        for k, f_c in enumerate(cfg.frequencies):
            comps = tracer.components(geom, f_c)
            if not comps:
                continue
            cir = Cir(tuple(comps), f_c, tuple(tracer.tx), tuple(rx), geom.los_blocked)
            rss[k, j] = narrowband_rss(cir, cfg.tx_power_dbm)
            ds[k, j] = rms_delay_spread(cir, cfg.rmsds_cut_db)
            npaths[k, j] = len(comps)
    return rss, ds, npaths, blocked, invalid


def _trajectory(cfg: CampaignConfig, height: float) -> np.ndarray:
    spec = default_trajectory(height, cfg.trajectory_spacing, cfg.trajectory_length,
                              cfg.trajectory_start_offset)
    return trajectory_samples(spec)


def run_campaign(cfg: CampaignConfig, workers: int | None = None) -> CampaignResult:
    """Trace every combination; raises :class:`CampaignError` on >5% invalid points.

    ``workers`` overrides ``cfg.workers``.  The result is identical for any
    worker count.
    """
    workers = cfg.workers if workers is None else workers
    if workers < 1:
        raise ValueError("workers must be >= 1")
    tasks = []
    for label in cfg.scenario_labels:
        for h in cfg.heights:
            n = len(_trajectory(cfg, h))
            tasks += [(cfg, label, h, i, min(i + CHUNK_SIZE, n)) for i in range(0, n, CHUNK_SIZE)]

    if workers == 1:
        outputs = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_chunk, tasks))

    grouped = {}
    for task, out in zip(tasks, outputs):
        grouped.setdefault((task[1], task[2]), []).append(out)

    traces, rmsds, invalid = {}, {}, {}
    tx_xy = np.array(TX_GROUND)
    for (label, h), outs in grouped.items():
        rss = np.concatenate([o[0] for o in outs], axis=1)
        ds = np.concatenate([o[1] for o in outs], axis=1)
        npaths = np.concatenate([o[2] for o in outs], axis=1)
        blocked = np.concatenate([o[3] for o in outs])
        bad = [i for o in outs for i in o[4]]
        invalid[(label, h)] = bad
        if len(bad) > MAX_INVALID_FRACTION * rss.shape[1]:
            raise CampaignError(f"{label} at {h:g} m: {len(bad)} of {rss.shape[1]} points invalid")
        dist = np.linalg.norm(_trajectory(cfg, h)[:, :2] - tx_xy, axis=1)
        for k, f_c in enumerate(cfg.frequencies):
            key = (label, f_c, h)
            traces[key] = RssTrace(dist, rss[k], npaths[k], ds[k], blocked.copy())
            rmsds[key] = ds[k][np.isfinite(ds[k])]
    return CampaignResult(cfg, traces, rmsds, invalid, cfg.seed, config_hash(cfg))


# -- output ---------------------------------------------------------------------------

def combination_tag(label: str, f_c: float, height: float) -> str:
    """File-name tag, e.g. ``urban_28GHz_50m``."""
    return f"{label}_{f_c / 1e9:g}GHz_{height:g}m"


def _g(v):
    return "nan" if not math.isfinite(v) else f"{v:.6g}"


def rss_csv(trace: RssTrace) -> str:
    rows = [RSS_HEADER]
    for d, r, n, s, b in zip(trace.distance, trace.rss_dbm, trace.num_paths, trace.rms_ds, trace.los_blocked):
        rows.append(f"{_g(d)},{_g(r)},{int(n)},{_g(s * 1e9)},{int(bool(b))}")
    return "\n".join(rows) + "\n"


def manifest_text(res: CampaignResult) -> str:
    cfg = res.config
    head = (f"# uavmmw campaign manifest\n# seed = {res.seed}\n# config_hash = {res.config_hash}\n"
            f"# tx = {TX_GROUND[0]:g},{TX_GROUND[1]:g},{cfg.tx_height:g}\n")
    bad = sum(len(v) for v in res.invalid.values())
    return head + f"# invalid_points = {bad}\n" + format_config(cfg)


def _write(path: Path, text: str):
    # write to a sibling temp file first so a failure never leaves a partial file
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(res: CampaignResult, directory=None) -> list[Path]:
    """Write per-combination RSS and RMS-DS CDF CSVs plus ``manifest.txt``."""
    out = Path(directory if directory is not None else res.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for key in sorted(res.traces, key=lambda k: (res.config.scenario_labels.index(k[0]), k[1], k[2])):
        tag = combination_tag(*key)
        path = out / f"rss_{tag}.csv"
        _write(path, rss_csv(res.traces[key]))
        written.append(path)
        cdf = res.cdf(key)
        path = out / f"cdf_rmsds_{tag}.csv"
        _write(path, cdf.to_text(CDF_HEADER) if cdf is not None else CDF_HEADER + "\n")
        written.append(path)
    path = out / "manifest.txt"
    _write(path, manifest_text(res))
    written.append(path)
    return written
