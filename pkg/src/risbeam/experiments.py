"""Monte-Carlo experiment drivers and artifact emission.

Each experiment runs trials keyed by (element count, seed), aggregates in a
canonical order independent of completion order, and writes UTF-8 CSV with a
`#key=value` metadata header (config hash, package version, seeds). CSVs are
the reproducibility contract: same config and seeds give byte-identical
files. Wall-clock is recorded per trial but kept out of the CSVs. Plots are
optional side artifacts behind a flag.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import (PACKAGE_VERSION, SystemConfig, config_hash, load_config)
from .channels import build_scenario
from .driver import (algorithm3, baseline_rates, baseline_ris_isac,
                     flatten_for_baseline)
from .rates import RateReport, rate_report
from .sensing import (gain_profile, illumination_heatmap, make_angle_grid,
                      min_gain)

VERSION_TAG = f"risbeam-{PACKAGE_VERSION}"
HEAT_WINDOW_X = (-100.0, 100.0)
HEAT_WINDOW_Y = (0.0, 100.0)


@dataclass
class ExperimentResult:
    """One trial's record. chi is re-evaluated from the returned design as
    the minimum gain over the interested angles, so it matches the recorded
    profile by construction."""

    kind: str                 # "noma" | "baseline"
    seed: object
    chi: float
    angles: np.ndarray
    gains: np.ndarray
    rates: RateReport | None
    user_rates: np.ndarray | None
    outer_trace: tuple
    active_traces: tuple
    passive_traces: tuple
    diagnostics: dict
    wall_clock_s: float


def trial_seeds(config: SystemConfig, n: int):
    """Deterministic per-trial seeds derived from the config's master seed."""
    return [(config.rng_seed, i) for i in range(n)]


def run_noma_trial(config: SystemConfig, seed) -> ExperimentResult:
    t0 = time.perf_counter()
    _, channels = build_scenario(config, seed)
    result = algorithm3(channels, config, seed)
    grid = make_angle_grid(config)
    gains = gain_profile(result.state.V, result.state.W, channels.G,
                         grid.angles, config.spacing_ratio)
    chi, _ = min_gain(result.state.V, result.state.W, channels.G,
                      grid.interested_angles, config.spacing_ratio)
    return ExperimentResult(
        kind="noma", seed=seed, chi=chi, angles=grid.angles, gains=gains,
        rates=rate_report(result.state, channels, config), user_rates=None,
        outer_trace=result.outer_trace, active_traces=result.active_traces,
        passive_traces=result.passive_traces,
        diagnostics=result.diagnostics,
        wall_clock_s=time.perf_counter() - t0)


def run_baseline_trial(config: SystemConfig, seed) -> ExperimentResult:
    t0 = time.perf_counter()
    _, channels = build_scenario(config, seed)
    users = flatten_for_baseline(channels, config)
    result = baseline_ris_isac(users, config, seed)
    grid = make_angle_grid(config)
    gains = gain_profile(result.V, result.W, channels.G, grid.angles,
                         config.spacing_ratio)
    chi, _ = min_gain(result.V, result.W, channels.G,
                      grid.interested_angles, config.spacing_ratio)
    return ExperimentResult(
        kind="baseline", seed=seed, chi=chi, angles=grid.angles, gains=gains,
        rates=None,
        user_rates=baseline_rates(result.V, result.W, users, config),
        outer_trace=result.outer_trace, active_traces=(),
        passive_traces=(), diagnostics=result.diagnostics,
        wall_clock_s=time.perf_counter() - t0)


def _job(args):
    config, m, seed, kind = args
    cfg = replace(config, n_ris=m)
    runner = run_noma_trial if kind == "noma" else run_baseline_trial
    return (m, kind, seed), runner(cfg, seed)


def run_trials(config: SystemConfig, jobs, workers: int = 1) -> dict:
    """jobs: iterable of (m, kind, seed). Returns {key: ExperimentResult} in
    canonical key order regardless of completion order."""
    payload = [(config, m, seed, kind) for (m, kind, seed) in jobs]
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, res in pool.map(_job, payload):
                results[key] = res
    else:
        for args in payload:
            key, res = _job(args)
            results[key] = res
    return {(m, kind, seed): results[(m, kind, seed)]
            for (m, kind, seed) in jobs}


def ci95(samples) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        return 0.0
    return float(1.96 * x.std(ddof=1) / np.sqrt(x.size))


def beampattern_experiment(config: SystemConfig, seeds, m_list=None,
                           workers: int = 1):
    """Seed-averaged gain profiles per element count, normalized to unit
    peak, plus the raw target-angle means the qualitative checks compare."""
    if m_list is None:
        m_list = (config.n_ris,)
    jobs = [(m, "noma", s) for m in m_list for s in seeds]
    results = run_trials(config, jobs, workers)
    grid = make_angle_grid(config)
    mask = grid.mask.astype(int)
    curves = {}
    raw_means = {}
    for m in m_list:
        gains = np.stack([results[(m, "noma", s)].gains for s in seeds])
        mean = gains.mean(axis=0)
        peak = mean.max()
        curves[m] = mean / peak if peak > 0 else mean
        raw_means[m] = mean
    return {"angles": grid.angles, "mask": mask, "curves": curves,
            "raw_means": raw_means, "results": results}


def sweep_m_experiment(config: SystemConfig, seeds, m_list=(8, 12, 16),
                       workers: int = 1):
    """Paired mean min-gains (clustered vs baseline) per element count."""
    jobs = [(m, kind, s) for m in m_list for kind in ("noma", "baseline")
            for s in seeds]
    results = run_trials(config, jobs, workers)
    rows = []
    for m in m_list:
        noma = [results[(m, "noma", s)].chi for s in seeds]
        base = [results[(m, "baseline", s)].chi for s in seeds]
        rows.append((m, float(np.mean(noma)), ci95(noma),
                     float(np.mean(base)), ci95(base)))
    return {"rows": rows, "results": results}


def heatmap_experiment(config: SystemConfig, seed, resolution: int = 101):
    """Reflected-power map over the ground window for one designed trial."""
    _, channels = build_scenario(config, seed)
    result = algorithm3(channels, config, seed)
    xs = np.linspace(*HEAT_WINDOW_X, int(resolution))
    ys = np.linspace(*HEAT_WINDOW_Y, int(resolution))
    heat = illumination_heatmap(result.state, channels, config, (xs, ys))
    return {"xs": xs, "ys": ys, "heat": heat, "result": result}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, meta: dict, header, rows) -> None:
    lines = [f"#{k}={v}" for k, v in meta.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _meta(config: SystemConfig, **extra) -> dict:
    meta = {"config_hash": config_hash(config), "version": VERSION_TAG}
    meta.update(extra)
    return meta


def _resolve(config_path) -> SystemConfig:
    if isinstance(config_path, SystemConfig):
        return config_path
    return load_config(config_path)


def cli_beampattern(config_path, seeds, m_list=None, out=".",
                    plot: bool = False, workers: int = 1) -> Path:
    config = _resolve(config_path)
    if m_list is None:
        m_list = (config.n_ris,)
    data = beampattern_experiment(config, seeds, m_list, workers)
    header = ["angle_rad", "desired_mask"] + [f"gain_m{m}" for m in m_list]
    rows = []
    for i, angle in enumerate(data["angles"]):
        rows.append([angle, int(data["mask"][i])]
                    + [data["curves"][m][i] for m in m_list])
    out_path = Path(out) / "beampattern.csv"
    write_csv(out_path, _meta(config, seeds=list(seeds), m_list=list(m_list)),
              header, rows)
    if plot:
        _plot_beampattern(data, m_list, Path(out) / "beampattern.png")
    return out_path


def cli_sweep_m(config_path, m_list, seeds, out=".", plot: bool = False,
                workers: int = 1) -> Path:
    config = _resolve(config_path)
    data = sweep_m_experiment(config, seeds, tuple(m_list), workers)
    header = ["m", "mean_noma", "ci95_noma", "mean_baseline", "ci95_baseline"]
    out_path = Path(out) / "sweep_m.csv"
    write_csv(out_path, _meta(config, seeds=list(seeds), m_list=list(m_list)),
              header, data["rows"])
    if plot:
        _plot_sweep(data["rows"], Path(out) / "sweep_m.png")
    return out_path


def cli_heatmap(config_path, seed, resolution: int = 101, out=".",
                plot: bool = False) -> Path:
    config = _resolve(config_path)
    data = heatmap_experiment(config, seed, resolution)
    header = ["y_m"] + [_fmt(x) for x in data["xs"]]
    rows = [[y] + list(row) for y, row in zip(data["ys"], data["heat"])]
    out_path = Path(out) / "heatmap.csv"
    write_csv(out_path, _meta(config, seed=seed, resolution=resolution),
              header, rows)
    if plot:
        _plot_heatmap(data, Path(out) / "heatmap.png")
    return out_path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _plot_beampattern(data, m_list, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    deg = np.degrees(data["angles"])
    ax.fill_between(deg, data["mask"], alpha=0.15, color="gray",
                    label="desired")
    for m in m_list:
        ax.plot(deg, data["curves"][m], label=f"M={m}")
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("normalized beampattern gain")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _plot_sweep(rows, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ms = [r[0] for r in rows]
    ax.errorbar(ms, [r[1] for r in rows], yerr=[r[2] for r in rows],
                marker="o", label="clustered")
    ax.errorbar(ms, [r[3] for r in rows], yerr=[r[4] for r in rows],
                marker="s", label="baseline")
    ax.set_xlabel("RIS elements M")
    ax.set_ylabel("mean min beampattern gain (W)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _plot_heatmap(data, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    extent = (data["xs"][0], data["xs"][-1], data["ys"][0], data["ys"][-1])
    im = ax.imshow(data["heat"], origin="lower", extent=extent,
                   aspect="auto", cmap="inferno")
    fig.colorbar(im, ax=ax, label="normalized reflected power")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def trial_json(result: ExperimentResult) -> str:
    """Deterministic JSON summary of one trial (wall-clock included, so two
    runs differ only in that field)."""
    def plain(v):
        if isinstance(v, (list, tuple, np.ndarray)):
            return [plain(x) for x in v]
        if isinstance(v, (np.floating, float)):
            return float(v)
        if isinstance(v, (np.integer, int)):
            return int(v)
        return v

    payload = {
        "kind": result.kind,
        "seed": plain(result.seed) if isinstance(result.seed, tuple)
                else result.seed,
        "chi": result.chi,
        "outer_trace": plain(result.outer_trace),
        "converged_iterations": len(result.outer_trace),
        "diagnostics": {k: plain(v) for k, v in result.diagnostics.items()},
        "wall_clock_s": result.wall_clock_s,
    }
    if result.rates is not None:
        payload["rates"] = {
            "near": plain(result.rates.r_near),
            "far": plain(result.rates.r_far),
            "floors": [result.rates.r_min_near, result.rates.r_min_far],
        }
    if result.user_rates is not None:
        payload["user_rates"] = plain(result.user_rates)
    return json.dumps(payload, indent=2, sort_keys=True)
