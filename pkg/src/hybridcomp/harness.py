"""Parameter sweeps over seeds and methods, CSV persistence and figure emission."""

from __future__ import annotations

import csv
import math
import runpy
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np
import yaml

from .baselines import METHODS, run_method
from .bcd import FEAS_TOL, InfeasibleInstanceError
from .config import ConfigError, SystemConfig
from .model import check_feasibility, energy
from .scenario import build_scenario

SWEEPABLE = ("mse_threshold_zeta", "p_max_edge", "num_edge_K", "horizon_T", "data_demand_Dk")
UNITS = {
    "mse_threshold_zeta": "1", "p_max_edge": "W", "num_edge_K": "count", "horizon_T": "s",
    "data_demand_Dk": "bit",
}
COLUMNS = (
    "method", "seed", "swept_param", "swept_value", "e_edge_tran_J", "e_aircomp_tran_J", "e_comp_J",
    "e_total_J", "feasible", "iterations", "wall_ms",
)


class UsageError(ValueError):
    """Bad request to the harness (unknown plot kind, malformed sweep spec)."""


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    methods: tuple = METHODS
    seeds: tuple = tuple(range(10))

    def __post_init__(self) -> None:
        if self.param not in SWEEPABLE:
            raise ConfigError(f"cannot sweep {self.param!r}; choose from {', '.join(SWEEPABLE)}")
        if not self.values:
            raise ConfigError("sweep value list is empty")
        v = np.asarray(self.values, float)
        steps = np.diff(v)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigError("sweep values must be strictly monotone")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if self.param == "num_edge_K" and any(int(x) != x or x < 1 for x in self.values):
            raise ConfigError("num_edge_K values must be positive integers")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = {"param", "values", "methods", "seeds"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown sweep keys: {', '.join(extra)}")
        if "param" not in data or "values" not in data:
            raise ConfigError("sweep spec needs 'param' and 'values'")
        kw = {"param": data["param"], "values": tuple(data["values"])}
        if "methods" in data:
            kw["methods"] = tuple(data["methods"])
        if "seeds" in data:
            kw["seeds"] = tuple(int(s) for s in data["seeds"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return {"param": self.param, "values": list(self.values), "methods": list(self.methods),
                "seeds": list(self.seeds)}


def load_sweep(path: str | Path) -> SweepSpec:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return SweepSpec.from_dict(data)


@dataclass(frozen=True)
class Row:
    method: str
    seed: int
    swept_param: str
    swept_value: float
    e_edge_tran_J: float
    e_aircomp_tran_J: float
    e_comp_J: float
    e_total_J: float
    feasible: bool
    iterations: int
    wall_ms: float

    def key(self):
        return (self.method, self.swept_value, self.seed)


def cell_config(base: SystemConfig, param: str, value) -> SystemConfig:
    """Config for one sweep cell; ``base`` itself is never modified.

    ``num_edge_K`` keeps ``J + K`` fixed; ``horizon_T`` keeps the slot count fixed.
    """
    if param == "num_edge_K":
        total = base.num_aircomp_J + base.num_edge_K
        K = int(value)
        if K > total:
            raise ConfigError(f"num_edge_K={K} exceeds J+K={total}")
        return base.replace(num_edge_K=K, num_aircomp_J=total - K)
    return base.replace(**{param: float(value)})


def run_cell(base: SystemConfig, param: str, value, method: str, seed: int, timing: bool = True) -> Row:
    cfg = cell_config(base, param, value)
    t0 = time.perf_counter()
    try:
        scenario = build_scenario(cfg, seed)
        d, trace = run_method(method, cfg, scenario, seed)
    except InfeasibleInstanceError:
        ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
        nan = float("nan")
        return Row(method, seed, param, float(value), nan, nan, nan, nan, False, 0, ms)
    ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
    e = energy(cfg, d)
    ok = check_feasibility(cfg, scenario, d, tol=FEAS_TOL).feasible
    return Row(method, seed, param, float(value), e.e_edge_tran, e.e_aircomp_tran, e.e_comp, e.total,
               ok, trace.iterations, ms)


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(base: SystemConfig, spec: SweepSpec, jobs: int = 1, timing: bool = True) -> list[Row]:
    """One row per (value, seed, method); infeasible cells are recorded, not raised.

    Cells run on at most ``jobs`` worker processes and are merged in key order.
    """
    for v in spec.values:
        cell_config(base, spec.param, v)  # fail early on impossible values
    cells = [(base, spec.param, v, m, s, timing) for v in spec.values for s in spec.seeds for m in spec.methods]
    if jobs <= 1:
        rows = [_run_cell_args(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_args, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    return sorted(rows, key=Row.key)


# ---------------------------------------------------------------- CSV

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows: list[Row], path: str | Path) -> Path:
    path = Path(path)
    rows = sorted(rows, key=Row.key)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in astuple(r)])
    return path


def read_csv(path: str | Path) -> list[Row]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        types = {f.name: f.type for f in fields(Row)}
        out = []
        for line in reader:
            vals = {}
            for name, raw in zip(COLUMNS, line):
                kind = types[name]
                if kind == "bool":
                    vals[name] = raw == "true"
                elif kind == "int":
                    vals[name] = int(raw)
                elif kind == "float":
                    vals[name] = float(raw)
                else:
                    vals[name] = raw
            out.append(Row(**vals))
    return out


def seed_means(rows: list[Row], method: str, column: str = "e_total_J") -> tuple[np.ndarray, np.ndarray]:
    """Swept values and per-value means of ``column`` over feasible seeds of ``method``."""
    xs = sorted({r.swept_value for r in rows if r.method == method})
    means = []
    for x in xs:
        vals = [getattr(r, column) for r in rows if r.method == method and r.swept_value == x and r.feasible]
        means.append(float(np.mean(vals)) if vals else math.nan)
    return np.array(xs), np.array(means)


# ---------------------------------------------------------------- figures

PLOT_KINDS = {
    "mse_threshold_zeta": ("e_total_J",),
    "p_max_edge": ("e_total_J",),
    "num_edge_K": ("e_edge_tran_J", "e_comp_J"),
    "horizon_T": ("e_total_J",),
    "data_demand_Dk": ("e_total_J",),
}

_SCRIPT = '''\
# Regenerates {svg} from the embedded sweep data.
import matplotlib
matplotlib.use("svg")
import matplotlib.pyplot as plt

matplotlib.rcParams["svg.hashsalt"] = "hybridcomp"
XLABEL = {xlabel!r}
COLUMNS = {columns!r}
DATA = {data!r}

fig, axes = plt.subplots(1, len(COLUMNS), figsize=(5 * len(COLUMNS), 4), squeeze=False)
for ax, col in zip(axes[0], COLUMNS):
    for method, series in DATA.items():
        xs = sorted(series)
        means = []
        for x in xs:
            ys = series[x][col]
            ax.scatter([x] * len(ys), ys, s=8, alpha=0.35)
            means.append(sum(ys) / len(ys) if ys else float("nan"))
        ax.plot(xs, means, marker="o", label=method)
    ax.set_xlabel(XLABEL)
    ax.set_ylabel(col.rsplit("_", 1)[0] + " [J]")
    ax.set_yscale("log")
    ax.legend()
fig.tight_layout()
fig.savefig({svg!r}, format="svg", metadata={{"Date": None}})
'''


def emit_plot(rows: list[Row], kind: str, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``<kind>.svg`` plus the ``<kind>_plot.py`` script that produced it.

    One mean line per method with the per-seed values scattered behind it; infeasible
    cells are left out.
    """
    if kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    if not rows:
        raise UsageError("cannot plot an empty result table")
    out_dir = Path(out_dir)
    columns = PLOT_KINDS[kind]
    data: dict[str, dict[float, dict[str, list[float]]]] = {}
    for r in sorted(rows, key=Row.key):
        if r.swept_param != kind:
            raise UsageError(f"table sweeps {r.swept_param}, not {kind}")
        cell = data.setdefault(r.method, {}).setdefault(r.swept_value, {c: [] for c in columns})
        if r.feasible:
            for c in columns:
                cell[c].append(getattr(r, c))
    svg = out_dir / f"{kind}.svg"
    script = out_dir / f"{kind}_plot.py"
    text = _SCRIPT.format(
        svg=svg.name, xlabel=f"{kind} [{UNITS[kind]}]", columns=columns,
        data=data,
    )
    script.write_text(text)
    _render(script)
    return svg, script


def _render(script: Path) -> None:
    import os

    cwd = os.getcwd()
    try:
        os.chdir(script.parent)
        runpy.run_path(str(script.name), run_name="__main__")
    finally:
        os.chdir(cwd)
        import matplotlib.pyplot as plt

        plt.close("all")
