"""SVG figure rendering for experiment reports."""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .intensity import IntensityModel, eval_intensity


def intensity_figure(model: IntensityModel, theta: float, path) -> str:
    """Plot the rate function with its transition window marked."""
    grid = np.unique(np.concatenate([
        np.linspace(0.0, model.tau, 512), model.breakpoints([theta])]))
    rates = eval_intensity(model, theta, grid)
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    ax.plot(grid, rates, lw=1.8)
    ax.axvline(theta, color="0.4", ls="--", lw=0.9)
    if model.delta > 0:
        ax.axvline(theta + model.delta, color="0.4", ls=":", lw=0.9)
    ax.set_xlabel("t")
    ax.set_ylabel("rate")
    ax.set_title("intensity with transition at theta=%g (width %g)"
                 % (theta, model.delta))
    ax.set_ylim(bottom=0.0)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return str(path)


def error_histogram(norm_errors, reference, path, title: str) -> str:
    """Histogram of normalized errors with the reference law overlaid.

    `reference` is either ("normal", sd) or ("sample", array).
    """
    errs = np.asarray(norm_errors, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.hist(errs, bins=max(12, min(60, errs.size // 30)), density=True,
            alpha=0.55, label="replications")
    kind, ref = reference
    if kind == "normal":
        grid = np.linspace(errs.min(), errs.max(), 400)
        pdf = np.exp(-0.5 * (grid / ref) ** 2) / (ref * math.sqrt(2 * math.pi))
        ax.plot(grid, pdf, lw=1.6, label="limit density")
    elif kind == "sample":
        ref = np.asarray(ref, dtype=float)
        lo, hi = errs.min(), errs.max()
        counts, edges = np.histogram(ref[(ref >= lo) & (ref <= hi)], bins=60)
        frac_in = max(np.mean((ref >= lo) & (ref <= hi)), 1e-12)
        density = counts / counts.sum() / np.diff(edges) * frac_in
        ax.step(edges[:-1], density, where="post", lw=1.4,
                label="limit reference sample")
    ax.set_xlabel("normalized error")
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return str(path)


def render_report_figures(report, output_dir) -> list:
    """Intensity plot plus one error histogram per (n, estimator)."""
    from .limits import reference_samples

    config = report.config
    written = []
    n_max = max(config.n_grid)
    written.append(intensity_figure(
        config.model_at(n_max), config.theta_true,
        os.path.join(output_dir, "intensity.svg")))

    regime = config.schedule.regime
    ref_by_est = {}
    if regime in ("slow", "fixed_delta"):
        from .experiment import _reference_sd
        sd = _reference_sd(config, n_max)
        if sd is not None:
            ref_by_est = {"mle": ("normal", sd), "bayes": ("normal", sd)}
    elif regime == "fast":
        from .intensity import limit_levels
        a, b = limit_levels(config.model, config.theta_true)
        size = min(config.reference_size, 20_000)
        etas, zetas, _ = reference_samples(size, report.reference_seed,
                                           a=a, b=b)
        ref_by_est = {"mle": ("sample", etas), "bayes": ("sample", zetas)}

    for n in config.n_grid:
        for est in ("mle", "bayes"):
            errs = [getattr(r, f"norm_err_{est}") for r in report.replications
                    if r.n == n]
            if len(errs) < 2:
                continue
            ref = ref_by_est.get(est, ("none", None))
            name = os.path.join(output_dir, f"errors_{est}_n{int(n)}.svg")
            title = f"{est} normalized errors, n={int(n)} ({regime})"
            if ref[0] == "none":
                fig, ax = plt.subplots(figsize=(6.0, 3.6))
                ax.hist(errs, bins=40, density=True, alpha=0.6)
                ax.set_title(title + ", no reference")
                fig.tight_layout()
                fig.savefig(name, format="svg")
                plt.close(fig)
            else:
                error_histogram(errs, ref, name, title)
            written.append(name)
    return written
