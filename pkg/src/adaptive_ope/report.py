"""Figure rendering for finished experiment runs.

Renders error-distribution and accuracy-versus-horizon figures to PNG
files next to the delimited exports, using a non-interactive backend so
the module is safe in headless runs.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import ScenarioResult, default_kde_grid, kde_curve, scott_bandwidth

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def _estimator_errors(result: ScenarioResult, kind: str) -> np.ndarray:
    return np.array(
        [t.outcomes[kind].error for t in result.trials if not t.outcomes[kind].failed]
    )


def render_error_distribution(result: ScenarioResult, path: str) -> None:
    """Overlay smoothed error densities of every estimator in one scenario."""
    scenario = result.context.scenario
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for i, kind in enumerate(scenario.estimators):
        errors = _estimator_errors(result, kind)
        if errors.size == 0:
            continue
        bandwidth = scott_bandwidth(errors)
        grid = default_kde_grid(errors, bandwidth)
        ax.plot(
            grid,
            kde_curve(errors, bandwidth, grid),
            label=kind,
            color=_COLORS[i % len(_COLORS)],
        )
    ax.axvline(0.0, color="black", linewidth=0.8, linestyle=":")
    ax.set_xlabel("truth minus estimate")
    ax.set_ylabel("density")
    ax.set_title(f"{scenario.name}: error distribution at T={scenario.horizon}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_rmse_by_horizon(results: list, path: str) -> None:
    """One accuracy-vs-horizon panel per (DGP, logger) family in ``results``."""
    families: dict = defaultdict(list)
    for result in results:
        scenario = result.context.scenario
        families[(scenario.dgp, scenario.logger)].append(result)
    n = len(families)
    fig, axes = plt.subplots(1, n, figsize=(5.0 * n, 4.0), squeeze=False)
    for ax, ((dgp, logger), group) in zip(axes[0], sorted(families.items())):
        group = sorted(group, key=lambda r: r.context.scenario.horizon)
        kinds: dict = defaultdict(list)
        for result in group:
            for row in result.metrics:
                if np.isfinite(row.rmse):
                    kinds[row.estimator].append((row.horizon, row.rmse))
        for i, (kind, points) in enumerate(sorted(kinds.items())):
            horizons, rmses = zip(*sorted(points))
            ax.plot(horizons, rmses, marker="o", label=kind, color=_COLORS[i % len(_COLORS)])
        ax.set_yscale("log")
        ax.set_xlabel("horizon T")
        ax.set_ylabel("root mean squared error")
        ax.set_title(f"{logger} logging, {dgp}")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(results: list, out_dir: str) -> list:
    """Render all standard figures under ``out_dir``/figures; return the paths."""
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    paths = []
    for result in results:
        scenario = result.context.scenario
        path = os.path.join(fig_dir, f"errors-{scenario.name}-T{scenario.horizon}.png")
        render_error_distribution(result, path)
        paths.append(path)
    if results:
        path = os.path.join(fig_dir, "rmse-by-horizon.png")
        render_rmse_by_horizon(results, path)
        paths.append(path)
    return paths
