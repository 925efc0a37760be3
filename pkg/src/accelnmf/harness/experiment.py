"""Multi-seed experiments and normalized convergence curves.

Every run of an experiment starts from factors drawn with
:func:`init_factors` for its seed, so all configurations share the same
initial points. Curves use

    E(t) = (e(t) - e_min) / (e(0) - e_min)

with ``e_min`` the smallest error seen in any run of the experiment and
``e(t)`` the last recorded error at or before ``t``.
"""
import logging
import math
import re
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from ..accel import AccelConfig, PRESETS, calibrate_rho, run_nmf
from ..linalg import nnz
from ..updates import Safeguards
from . import io
from .synth import SYNTH_KINDS, init_factors, synth_matrix

log = logging.getLogger(__name__)

THRESHOLDS = (0.1, 0.01)


@dataclass(frozen=True)
class SynthSource:
    kind: str
    m: int
    n: int
    r_true: int = 1
    density: float = 1.0
    noise: float = 0.0
    seed: int = 0

    def load(self):
        return synth_matrix(self.kind, self.m, self.n, self.r_true,
                            self.density, self.noise, self.seed)

    def describe(self):
        return (f"synth:{self.kind},{self.m},{self.n},{self.r_true},"
                f"{self.density:g},{self.noise:g}")


@dataclass(frozen=True)
class FileSource:
    path: str
    fmt: str = "mm"

    def load(self):
        return io.load_matrix(self.path, self.fmt)

    def describe(self):
        return f"file:{self.path},{self.fmt}"


def parse_synth(text, seed=0):
    """Parse ``kind,m,n,r,density,noise`` (trailing fields optional)."""
    parts = [p.strip() for p in text.split(",")]
    if not 3 <= len(parts) <= 6 or parts[0] not in SYNTH_KINDS:
        raise ValueError(
            f"synthetic source must be kind,m,n[,r,density,noise] with kind in "
            f"{SYNTH_KINDS}; got {text!r}")
    kind, m, n = parts[0], int(parts[1]), int(parts[2])
    r = int(parts[3]) if len(parts) > 3 else 1
    density = float(parts[4]) if len(parts) > 4 else 1.0
    noise = float(parts[5]) if len(parts) > 5 else 0.0
    return SynthSource(kind, m, n, r, density, noise, seed)


@dataclass
class ExperimentSpec:
    dataset: object
    rank: int
    configs: list
    seeds: list
    time_budget: Optional[float] = None
    max_outer: Optional[int] = None
    output: Optional[str] = None
    plot: bool = False

    def validate(self):
        if not self.seeds:
            raise ValueError("experiment needs at least one seed")
        if not self.configs:
            raise ValueError("experiment needs at least one config")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        labels = [c.label for c in self.configs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"config labels must be unique, got {labels}")
        if self.time_budget is None and self.max_outer is None:
            if any(c.time_budget is None and c.max_outer is None for c in self.configs):
                raise ValueError("set time_budget or max_outer")


def _parse_seeds(text):
    seeds = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        span = re.fullmatch(r"(\d+)-(\d+)", part)
        if span:
            seeds.extend(range(int(span[1]), int(span[2]) + 1))
        else:
            seeds.append(int(part))
    return seeds


def parse_config(text):
    """Parse a ``config=`` value.

    An optional leading preset name (``a-mu``, ``hals``, ...) is followed
    by whitespace separated ``key=value`` overrides among ``label``,
    ``algo``, ``alpha``, ``epsilon``, ``delta`` and ``rho``.
    """
    tokens = text.split()
    params = {}
    if tokens and "=" not in tokens[0]:
        name = tokens.pop(0).lower()
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        params.update(PRESETS[name], label=name.upper())
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {tok!r}")
        if key == "label":
            params["label"] = value
        elif key == "algo":
            params["algo"] = value.lower()
        elif key in ("alpha", "epsilon"):
            params[key] = float(value)
        elif key == "delta":
            params["safeguards"] = Safeguards(delta=float(value))
        elif key == "rho":
            params["rho_source"] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    return AccelConfig(**params)


def parse_spec_file(path):
    """Read a line-oriented ``key = value`` experiment description.

    Keys: ``dataset`` (``synth:kind,m,n,r,density,noise`` or
    ``file:PATH[,FORMAT]``), ``data_seed``, ``rank``, ``seeds``
    (``0,1,5`` or ``0-9``), ``time_budget``, ``max_outer``, ``output``,
    ``plot`` and any number of ``config`` lines. ``#`` starts a comment.
    """
    path = Path(path)
    fields, configs = {}, []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = key.strip(), value.strip()
            try:
                if key == "config":
                    configs.append(parse_config(value))
                elif key in ("dataset", "data_seed", "rank", "seeds", "time_budget",
                             "max_outer", "output", "plot"):
                    fields[key] = value
                else:
                    raise ValueError(f"unknown key {key!r}")
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if "dataset" not in fields or "rank" not in fields:
        raise ValueError(f"{path}: dataset and rank are required")
    data_seed = int(fields.get("data_seed", 0))
    source = fields["dataset"]
    if source.startswith("synth:"):
        dataset = parse_synth(source[len("synth:"):], data_seed)
    elif source.startswith("file:"):
        target, _, fmt = source[len("file:"):].rpartition(",")
        if not target:
            target, fmt = fmt, "mm"
        target = Path(target)
        if not target.is_absolute():
            target = path.parent / target
        dataset = FileSource(str(target), fmt or "mm")
    else:
        raise ValueError(f"{path}: dataset must start with synth: or file:")
    spec = ExperimentSpec(
        dataset=dataset,
        rank=int(fields["rank"]),
        configs=configs,
        seeds=_parse_seeds(fields.get("seeds", "")),
        time_budget=float(fields["time_budget"]) if "time_budget" in fields else None,
        max_outer=int(fields["max_outer"]) if "max_outer" in fields else None,
        output=fields.get("output"),
        plot=fields.get("plot", "false").lower() in ("1", "true", "yes"),
    )
    if spec.output is not None and not Path(spec.output).is_absolute():
        spec.output = str(path.parent / spec.output)
    return spec


@dataclass
class Curve:
    """Seed-averaged E(t) on a time grid; ``per_seed`` has one row per run."""

    label: str
    t: np.ndarray
    per_seed: np.ndarray
    degenerate: list = field(default_factory=list)

    @property
    def mean(self):
        return self.per_seed.mean(axis=0)

    @property
    def min(self):
        return self.per_seed.min(axis=0)

    @property
    def max(self):
        return self.per_seed.max(axis=0)


def step_values(times, values, grid):
    """Last value recorded at or before each grid point (first one before it)."""
    idx = np.searchsorted(np.asarray(times), np.asarray(grid), side="right") - 1
    return np.asarray(values)[np.clip(idx, 0, None)]


def normalized_curve(traces, grid=None, e_min=None):
    """Average normalized error curves per configuration label.

    Parameters
    ----------
    traces : list of RunTrace
        Runs on one dataset and rank.
    grid : array_like, optional
        Time points; defaults to the sorted union of all sample times.
    e_min : float, optional
        Reference minimum, by default the smallest error over ``traces``.

    Returns
    -------
    curves : dict
        Label to :class:`Curve`, in first-seen order.
    e_min : float
    """
    if not traces:
        raise ValueError("need at least one trace")
    if e_min is None:
        e_min = min(min(tr.errors) for tr in traces)
    if grid is None:
        grid = np.unique(np.concatenate([np.asarray(tr.elapsed) for tr in traces]))
    grid = np.asarray(grid, dtype=np.float64)
    rows, flags = {}, {}
    for tr in traces:
        label = tr.config.label
        e = step_values(tr.elapsed, tr.errors, grid)
        gap = tr.errors[0] - e_min
        degenerate = gap <= 0
        E = np.zeros_like(grid) if degenerate else (e - e_min) / gap
        rows.setdefault(label, []).append(E)
        flags.setdefault(label, []).append(degenerate)
    curves = {label: Curve(label, grid, np.vstack(r), flags[label])
              for label, r in rows.items()}
    return curves, e_min


def time_to_threshold(t, E, threshold):
    """First ``t`` with ``E <= threshold``; ``inf`` if never reached."""
    hit = np.flatnonzero(np.asarray(E) <= threshold)
    return float(t[hit[0]]) if hit.size else math.inf


def per_seed_times(curve, threshold):
    return [time_to_threshold(curve.t, row, threshold) for row in curve.per_seed]


def _safe(label):
    return re.sub(r"[^A-Za-z0-9._-]+", "_", label).strip("_") or "config"


@dataclass
class ExperimentResult:
    traces: list
    curves: dict
    e_min: float
    summary: list
    failures: list


def run_experiment(spec, write=True, progress=None):
    """Run every (seed, config) pair of ``spec`` and aggregate the curves.

    Failed runs are logged and recorded in the summary; the experiment
    goes on. With ``write`` set and ``spec.output`` given, per-run trace
    CSVs go to ``output/traces/``, averaged curves to
    ``output/curve_<label>.csv`` and the summary to ``output/summary.txt``.
    """
    spec.validate()
    M = spec.dataset.load()
    m, n = M.shape
    r = spec.rank
    traces, failures = [], []
    measured = {}

    with threadpool_limits(limits=1):
        for seed in spec.seeds:
            init = init_factors(m, n, r, seed, M)
            for cfg in spec.configs:
                cfg = replace(cfg, seed=seed)
                if spec.max_outer is not None or spec.time_budget is not None:
                    # experiment-level stopping rule replaces the per-config one
                    cfg = replace(cfg, max_outer=spec.max_outer, time_budget=spec.time_budget)
                try:
                    rho = None
                    if cfg.rho_source == "measured":
                        if cfg.algo not in measured:
                            measured[cfg.algo] = calibrate_rho(M, init.W, init.H, cfg.algo)
                        rho = measured[cfg.algo]
                    tr = run_nmf(M, init.W, init.H, cfg, rho=rho)
                except Exception as exc:  # keep going, report in summary
                    log.warning("run %s seed %d failed: %s", cfg.label, seed, exc)
                    log.debug("%s", traceback.format_exc())
                    failures.append((cfg.label, seed, f"{type(exc).__name__}: {exc}"))
                    continue
                traces.append(tr)
                if progress is not None:
                    progress(tr)

    curves, e_min = normalized_curve(traces) if traces else ({}, math.nan)
    summary = [
        ("dataset", spec.dataset.describe()),
        ("m", m), ("n", n), ("K", nnz(M)), ("rank", r),
        ("seeds", ",".join(str(s) for s in spec.seeds)),
        ("runs", len(traces)), ("failures", len(failures)),
        ("e_min", repr(float(e_min))),
    ]
    for cfg in spec.configs:
        label = cfg.label
        runs = [tr for tr in traces if tr.config.label == label]
        summary.append((f"{label}.runs", len(runs)))
        if not runs:
            continue
        summary += [
            (f"{label}.algo", cfg.algo),
            (f"{label}.alpha", cfg.alpha),
            (f"{label}.epsilon", cfg.epsilon),
            (f"{label}.rho_source", runs[0].rho_source),
            (f"{label}.rho_w", repr(float(runs[0].rho_w))),
            (f"{label}.rho_h", repr(float(runs[0].rho_h))),
            (f"{label}.mean_outer_iters", float(np.mean([tr.outer_iterations for tr in runs]))),
        ]
        curve = curves[label]
        for thr in THRESHOLDS:
            summary.append((f"{label}.time_to_mean_E_{thr:g}",
                            repr(time_to_threshold(curve.t, curve.mean, thr))))
            summary.append((f"{label}.median_seed_time_to_E_{thr:g}",
                            repr(float(np.median(per_seed_times(curve, thr))))))
        summary.append((f"{label}.final_mean_E", repr(float(curve.mean[-1]))))
        summary.append((f"{label}.degenerate_runs", sum(curve.degenerate)))
    for label, seed, message in failures:
        summary.append((f"failure.{label}.seed{seed}", message.replace("\n", " ")))

    result = ExperimentResult(traces, curves, e_min, summary, failures)
    if write and spec.output:
        write_outputs(spec, result)
    return result


def write_outputs(spec, result):
    out = Path(spec.output)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    for tr in result.traces:
        io.write_trace_csv(out / "traces" / f"{_safe(tr.config.label)}_seed{tr.config.seed}.csv", tr)
    for label, curve in result.curves.items():
        io.write_curve_csv(out / f"curve_{_safe(label)}.csv", curve)
    io.write_summary(out / "summary.txt", result.summary)
    if spec.plot and result.curves:
        from .plotting import plot_curves
        plot_curves(result.curves, out / "curves.png",
                    title=spec.dataset.describe() + f", r={spec.rank}")
