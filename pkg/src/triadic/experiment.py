"""Experiment configuration, replicated runs and their on-disk tables."""
from __future__ import annotations

import csv
import gzip
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .params import ModelParams, ParameterError, to_fraction
from .simulator import GraphState, describe_backend, init, run

CONFIG_SCHEMA = "triadic-config/1"

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "read_config_file",
    "resolve_config",
    "geometric_checkpoints",
    "SeedRun",
    "simulate_seed",
    "simulate_seeds",
    "crafted_state",
    "write_csv",
    "read_csv",
    "fraction_text",
]


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def fraction_text(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _parse_int_list(text: str) -> list[int]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            lo, hi = part.split(":", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings of one experiment.  Numerics are kept as decimal strings."""

    p: str = "1"
    q: str = "0"
    r: str = "1"
    steps: int = 10 ** 6
    seeds: tuple[int, ...] = (0,)
    checkpoints: tuple[int, ...] | None = None  # None: geometric
    w_max: int = 32
    d_max: int = 64
    track: tuple[int, ...] = (0,)
    out: str = "triadic-out"
    exact: bool = False
    jobs: int = 1
    trials: int = 10 ** 6
    state: str = "init"
    snapshot: bool = True
    tv_tol: str = "0.01"
    x1_tol: str = "0.01"
    slope_tol: str = "0.05"
    ratio_tol: str = "0.1"

    def __post_init__(self):
        try:
            ModelParams(self.p, self.q, self.r)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.w_max < 1:
            raise ConfigError("w_max must be >= 1")
        if self.d_max < 2:
            raise ConfigError("d_max must be >= 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.state not in ("init", "crafted"):
            raise ConfigError("state must be 'init' or 'crafted'")
        if self.checkpoints is not None:
            cps = self.checkpoints
            if not cps:
                raise ConfigError("explicit checkpoint list is empty")
            if any(b <= a for a, b in zip(cps, cps[1:])):
                raise ConfigError("checkpoints must be strictly increasing")
            if cps[0] < 1 or cps[-1] > self.steps:
                raise ConfigError(f"checkpoints must lie in [1, steps={self.steps}]")
        for name in ("tv_tol", "x1_tol", "slope_tol", "ratio_tol"):
            if to_fraction(getattr(self, name)) < 0:
                raise ConfigError(f"{name} must be nonnegative")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.p, self.q, self.r)

    def checkpoint_list(self) -> list[int]:
        if self.checkpoints is not None:
            return list(self.checkpoints)
        return geometric_checkpoints(self.steps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["track"] = list(self.track)
        d["checkpoints"] = None if self.checkpoints is None else list(self.checkpoints)
        return d

    def content_dict(self) -> dict:
        """Settings that can change results; output location and worker count cannot."""
        d = self.to_dict()
        d.pop("out")
        d.pop("jobs")
        return d

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of :meth:`content_dict`."""
        blob = json.dumps({"schema": CONFIG_SCHEMA, "config": self.content_dict()},
                          sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_INT_KEYS = {"steps", "w_max", "d_max", "jobs", "trials"}
_LIST_KEYS = {"seeds", "track"}
_BOOL_KEYS = {"exact", "snapshot"}
_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` text; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_NAMES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge config-file strings with command-line overrides (which win)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    kwargs = {}
    try:
        for key, value in merged.items():
            if key not in _FIELD_NAMES:
                raise ConfigError(f"unknown setting {key!r}")
            if key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _LIST_KEYS:
                kwargs[key] = tuple(_parse_int_list(value)) if isinstance(value, str) else tuple(int(v) for v in value)
            elif key in _BOOL_KEYS:
                kwargs[key] = _parse_bool(value)
            elif key == "checkpoints":
                if isinstance(value, str) and value.strip().lower() in ("", "geometric"):
                    kwargs[key] = None
                else:
                    kwargs[key] = tuple(_parse_int_list(value)) if isinstance(value, str) else tuple(int(v) for v in value)
            else:
                kwargs[key] = str(value).strip()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if "w_max" in kwargs and "d_max" not in kwargs:  # degree cap follows the weight cap
        kwargs["d_max"] = 2 * kwargs["w_max"]
    return ExperimentConfig(**kwargs)


def geometric_checkpoints(steps: int, start: int = 1000, per_decade: int = 8) -> list[int]:
    """Rounded 10^(k/per_decade) for all such values in [start, steps], plus ``steps`` itself."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    k = math.ceil(per_decade * math.log10(start) - 1e-9)
    out = []
    while True:
        c = int(round(10 ** (k / per_decade)))
        if c > steps:
            break
        if c >= start and (not out or c > out[-1]):
            out.append(c)
        k += 1
    if not out or out[-1] != steps:
        out.append(steps)
    return out


# ---------------------------------------------------------------- tables


def write_csv(path, header: list[str], rows, meta: dict):
    """CSV with leading ``#`` lines carrying the config digest and the resolved config."""
    buf = io.StringIO()
    buf.write(f"# config_sha256={meta['config_sha256']}\n")
    buf.write("# config=" + json.dumps(meta["config"], sort_keys=True, separators=(",", ":")) + "\n")
    for note in meta.get("notes", ()):
        buf.write(f"# {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]], dict]:
    meta = {}
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return rows[0], rows[1:], meta


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- runs


@dataclass
class SeedRun:
    seed: int
    header: list[str]
    rows: list[list[int]]
    occupancy: np.ndarray
    n: int
    V: int
    wall_time: float
    snapshot: dict | None = field(default=None, repr=False)

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


def checkpoint_header(track) -> list[str]:
    head = ["n", "V", "E", "T", "max_weight", "max_degree"]
    for j in track:
        head += [f"W[{j}]", f"D[{j}]"]
    return head


def simulate_seed(config: ExperimentConfig, seed: int, keep_snapshot: bool | None = None) -> SeedRun:
    """One replication: run to ``config.steps`` recording every checkpoint."""
    keep = config.snapshot if keep_snapshot is None else keep_snapshot
    t0 = time.perf_counter()
    state = init(config.params, seed=seed, w_cap=config.w_max, d_cap=max(config.d_max, 2 * config.w_max))
    header = checkpoint_header(config.track)
    rows = []
    for cp in run(state, config.steps, config.checkpoint_list(), track=config.track):
        row = [cp.n, cp.V, state.num_edges, state.num_triangles, cp.max_weight, cp.max_degree]
        for j in config.track:
            row += list(cp.tracked[j])
        rows.append(row)
    wall = time.perf_counter() - t0
    snap = state.to_dict() if keep else None
    return SeedRun(seed, header, rows, state.occupancy(), state.n, state.num_vertices, wall, snap)


def _simulate_worker(args):
    cfg_dict, seed, keep = args
    cfg = resolve_config(overrides=cfg_dict)
    return simulate_seed(cfg, seed, keep)


def simulate_seeds(config: ExperimentConfig, keep_snapshot: bool | None = None) -> list[SeedRun]:
    """All replications, one worker process per seed up to ``config.jobs``."""
    if config.jobs == 1 or len(config.seeds) == 1:
        return [simulate_seed(config, s, keep_snapshot) for s in config.seeds]
    payload = [(config.to_dict(), s, keep_snapshot) for s in config.seeds]
    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        return list(pool.map(_simulate_worker, payload))


def occupancy_rows(occ: np.ndarray):
    """Nonzero (w, d, count) cells; index w_cap+1 / d_cap+1 stands for the overflow bucket."""
    ws, ds = np.nonzero(occ)
    for w, d in zip(ws, ds):
        yield [int(w), int(d), int(occ[w, d])]


def save_snapshot(path, snapshot: dict):
    blob = json.dumps(snapshot, separators=(",", ":")).encode()
    Path(path).write_bytes(gzip.compress(blob, compresslevel=1, mtime=0))


def load_snapshot(path) -> GraphState:
    with gzip.open(path, "rt") as fh:
        return GraphState.from_dict(json.load(fh))


def run_metadata(config: ExperimentConfig, extra: dict | None = None) -> dict:
    meta = {
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "version": __version__,
        "backend": describe_backend(),
    }
    meta.update(extra or {})
    return meta


# ---------------------------------------------------------------- kernel-test states

CRAFTED_INTERACTIONS = ((-2, -1, 1), (0, 1, 2), (-1, 2, 3), (-2, 0, 2), (1, 2, 3))


def crafted_state(params: ModelParams, seed: int = 0) -> GraphState:
    """Six vertices (-2..3) with unequal weights and degrees, built from fixed interactions."""
    state = init(params, seed=seed)
    for triple in CRAFTED_INTERACTIONS:
        state.apply(triple)
    state.check_invariants()
    return state
