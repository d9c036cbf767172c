"""Monte Carlo campaigns: configs, replication runner, aggregation, reports.

A campaign is a pure function of its JSON config: every replication draws
its randomness from streams keyed by (master_seed, replication_index, ...),
so results are identical for any worker count, and aggregation is ordered
by (n, replication_index).
"""

from __future__ import annotations

import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .estimators import Prior, estimate
from .intensity import Baseline, IntensityModel, fisher_F, \
    fisher_information_regular, limit_levels
from .likelihood import (RateSchedule, char_fn_log_lr, hellinger_half_moment,
                         hellinger_increment, lan_central_term, limit_char_fn,
                         log_lr_many)
from .limits import reference_samples
from .rng import derive_key
from .sampling import sample_observations, write_sample_csv

_ANALYSES = ("estimator_dist", "lan_check", "hellinger_suite",
             "charfn_check", "limit_moments")
_REFERENCE_TAG = 0x5EED
_SUMMARY_STATS = ("mean_norm_err", "var_norm_err", "second_moment_norm_err",
                  "fourth_moment_norm_err", "mean_abs_norm_err",
                  "ks_distance", "ks_critical_0.001", "boundary_fraction")


class ConfigError(ValueError):
    """Raised when an experiment config fails validation (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    model: IntensityModel
    schedule: RateSchedule
    n_grid: tuple
    theta_true: float
    replications: int
    prior: Prior
    master_seed: int
    analyses: tuple
    output_dir: str
    lan_u_grid: tuple = (-2.0, -1.0, 1.0, 2.0)
    reference_size: int = 100_000

    def validate(self) -> None:
        if self.replications < 2:
            raise ConfigError("need at least 2 replications")
        if not self.n_grid or list(self.n_grid) != sorted(set(self.n_grid)):
            raise ConfigError("n_grid must be nonempty, sorted, increasing")
        if any(int(n) < 1 for n in self.n_grid):
            raise ConfigError("sample sizes must be positive")
        if not self.model.alpha < self.theta_true < self.model.beta:
            raise ConfigError("theta_true outside (alpha, beta)")
        unknown = set(self.analyses) - set(_ANALYSES)
        if unknown:
            raise ConfigError(f"unknown analyses: {sorted(unknown)}")
        try:
            self.schedule.check_grid(self.n_grid)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for n in self.n_grid:
            try:
                self.model.with_delta(self.schedule.delta_of(int(n)))
            except ValueError as exc:
                raise ConfigError(
                    f"model invalid at n={n} (delta_n="
                    f"{self.schedule.delta_of(int(n))}): {exc}") from exc

    def model_at(self, n: int) -> IntensityModel:
        return self.model.with_delta(self.schedule.delta_of(int(n)))

    def to_dict(self) -> dict:
        model = self.model
        psi = ({"constant": model.psi.level} if model.psi.is_constant else
               {"piecewise": [[float(t), float(v)] for t, v in
                              zip(model.psi.knot_times, model.psi.knot_rates)]})
        prior = ({"uniform": True} if self.prior.is_uniform else
                 {"table": [[float(t), float(q)] for t, q in
                            zip(self.prior.knots_t, self.prior.knots_q)]})
        return {
            "model": {"psi": psi, "r": model.r, "delta": model.delta,
                      "tau": model.tau, "alpha": model.alpha,
                      "beta": model.beta},
            "schedule": {"regime": self.schedule.regime,
                         "coef": self.schedule.coef,
                         "power": self.schedule.power},
            "n_grid": [int(n) for n in self.n_grid],
            "theta_true": self.theta_true,
            "replications": self.replications,
            "prior": prior,
            "master_seed": int(self.master_seed),
            "analyses": list(self.analyses),
            "output_dir": self.output_dir,
            "lan_u_grid": list(self.lan_u_grid),
            "reference_size": int(self.reference_size),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            model = parse_model(raw["model"])
            sched = raw["schedule"]
            schedule = RateSchedule(regime=sched["regime"],
                                    coef=float(sched["coef"]),
                                    power=float(sched.get("power", 0.0)))
            prior = parse_prior(raw.get("prior", {"uniform": True}))
            seed = int(os.environ.get("SCPP_SEED", raw["master_seed"]))
            cfg = cls(
                model=model,
                schedule=schedule,
                n_grid=tuple(int(n) for n in raw["n_grid"]),
                theta_true=float(raw["theta_true"]),
                replications=int(raw["replications"]),
                prior=prior,
                master_seed=seed,
                analyses=tuple(raw.get("analyses", ["estimator_dist"])),
                output_dir=str(raw.get("output_dir", "scpp-out")),
                lan_u_grid=tuple(float(u) for u in
                                 raw.get("lan_u_grid", (-2.0, -1.0, 1.0, 2.0))),
                reference_size=int(raw.get("reference_size", 100_000)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)


def parse_model(block: dict) -> IntensityModel:
    psi_block = block["psi"]
    if "constant" in psi_block:
        psi = Baseline.constant(float(psi_block["constant"]))
    elif "piecewise" in psi_block:
        psi = Baseline.piecewise(psi_block["piecewise"])
    else:
        raise ConfigError("psi must be {'constant': x} or {'piecewise': [...]}")
    try:
        return IntensityModel(psi=psi, r=float(block["r"]),
                              delta=float(block.get("delta", 0.0)),
                              tau=float(block["tau"]),
                              alpha=float(block["alpha"]),
                              beta=float(block["beta"]))
    except ValueError as exc:
        raise ConfigError(f"bad model: {exc}") from exc


def parse_prior(block: dict) -> Prior:
    if block.get("uniform"):
        return Prior.uniform()
    if "table" in block:
        return Prior.table(block["table"])
    raise ConfigError("prior must be {'uniform': true} or {'table': [...]}")


@dataclass(frozen=True)
class ReplicationResult:
    n: int
    replication_index: int
    seed: int
    mle: float
    bayes: float
    norm_err_mle: float
    norm_err_bayes: float
    boundary_flag: bool
    ln_z: tuple          # aligned with config.lan_u_grid (NaN outside domain)
    delta_n_stat: float | None


def run_replication(config: ExperimentConfig, n: int,
                    replication_index: int) -> ReplicationResult:
    """Deterministic function of (config, n, replication_index)."""
    model_n = config.model_at(n)
    phi = config.schedule.phi_of(n)
    theta = config.theta_true
    sample = sample_observations(model_n, theta, int(n), config.master_seed,
                                 replication_index)
    result = estimate(sample, prior=config.prior)
    ln_z = ()
    if "lan_check" in config.analyses:
        ln_z = tuple(log_lr_many(sample, theta, config.lan_u_grid,
                                 config.schedule).tolist())
    delta_stat = None
    if config.schedule.regime == "slow":
        delta_stat = lan_central_term(sample, theta, model_n.delta)
    for value in (result.mle, result.bayes):
        if not math.isfinite(value):
            raise ArithmeticError("estimator returned a non-finite value")
    return ReplicationResult(
        n=int(n), replication_index=replication_index, seed=sample.seed,
        mle=result.mle, bayes=result.bayes,
        norm_err_mle=(result.mle - theta) / phi,
        norm_err_bayes=(result.bayes - theta) / phi,
        boundary_flag=result.boundary, ln_z=ln_z, delta_n_stat=delta_stat)


def _replication_task(args):
    config, n, rep = args
    try:
        return run_replication(config, n, rep)
    except Exception as exc:  # recorded, never silently dropped
        return (int(n), int(rep), f"{type(exc).__name__}: {exc}")


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    replications: list
    failures: list
    summary_rows: list       # (n, estimator, statistic, value)
    analyses: dict
    gates: dict              # analysis name -> bool (None = not gated)
    reference_seed: int
    wall_time_s: float

    @property
    def passed(self) -> bool:
        return all(v for v in self.gates.values() if v is not None)


def _erf_vec(x):
    return np.vectorize(math.erf)(x)


def normal_cdf(x, sd: float = 1.0):
    return 0.5 * (1.0 + _erf_vec(np.asarray(x, dtype=float)
                                 / (sd * math.sqrt(2.0))))


def ks_distance(sample, reference) -> float:
    """One-sample KS (reference callable = CDF) or two-sample KS statistic."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 1:
        raise ValueError("empty sample")
    if callable(reference):
        cdf = np.asarray(reference(x), dtype=float)
        i = np.arange(1, n + 1)
        return float(max((i / n - cdf).max(), (cdf - (i - 1) / n).max()))
    y = np.sort(np.asarray(reference, dtype=float))
    if y.size < 1:
        raise ValueError("empty reference sample")
    grid = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, grid, side="right") / n
    cdf_y = np.searchsorted(y, grid, side="right") / y.size
    return float(np.abs(cdf_x - cdf_y).max())


def ks_critical_value(n: int, level: float = 0.001,
                      m: int | None = None) -> float:
    """Asymptotic KS critical value; two-sample when `m` is given."""
    c = math.sqrt(-math.log(level / 2.0) / 2.0)
    if m is None:
        return c / math.sqrt(n)
    return c * math.sqrt((n + m) / (n * m))


def _reference_sd(config: ExperimentConfig, n: int) -> float | None:
    """Std dev of the Gaussian reference for the normalized errors."""
    model_n = config.model_at(n)
    if config.schedule.regime == "slow":
        F = fisher_F(model_n, config.theta_true)
        return 1.0 / math.sqrt(F) if F > 0 else None
    if config.schedule.regime == "fixed_delta":
        info = fisher_information_regular(model_n, config.theta_true)
        return 1.0 / math.sqrt(info) if info > 0 else None
    return None


def run_experiment(config: ExperimentConfig,
                   threads: int | None = None) -> ExperimentReport:
    """Run all replications, aggregate, and evaluate the requested analyses."""
    config.validate()
    threads = threads or 1
    t_start = time.time()

    tasks = [(config, int(n), rep) for n in config.n_grid
             for rep in range(config.replications)]
    if threads > 1:
        with multiprocessing.Pool(threads) as pool:
            raw = pool.map(_replication_task, tasks, chunksize=8)
    else:
        raw = [_replication_task(t) for t in tasks]
    replications = [r for r in raw if isinstance(r, ReplicationResult)]
    failures = [r for r in raw if not isinstance(r, ReplicationResult)]

    reference_seed = derive_key(config.master_seed, _REFERENCE_TAG)
    analyses: dict = {"regime": config.schedule.regime}
    gates: dict = {}

    zeta_ref = None
    eta_ref = None
    if config.schedule.regime == "fast":
        a, b = limit_levels(config.model, config.theta_true)
        eta_ref, zeta_ref, trunc = reference_samples(
            config.reference_size, reference_seed, a=a, b=b,
            processes=threads)
        analyses["reference"] = {
            "kind": "zeta", "a": a, "b": b, "size": int(config.reference_size),
            "seed": int(reference_seed), "truncated": int(trunc),
            "zeta_second_moment": float((zeta_ref ** 2).mean()),
            "eta_second_moment": float((eta_ref ** 2).mean()),
        }
    elif config.schedule.regime == "critical":
        analyses["banner"] = ("critical regime n*delta_n -> c has no "
                              "theoretical reference; KS tests skipped")

    summary_rows = []
    dist_gate = None
    for n in config.n_grid:
        reps = [r for r in replications if r.n == n]
        for name, errs_all in (
                ("mle", np.array([r.norm_err_mle for r in reps])),
                ("bayes", np.array([r.norm_err_bayes for r in reps]))):
            stats = _error_stats(config, n, name, errs_all, reps,
                                 zeta_ref, eta_ref)
            for stat in _SUMMARY_STATS:
                summary_rows.append((int(n), name, stat, stats[stat]))
            if name == "bayes" and not math.isnan(stats["ks_critical_0.001"]):
                ok = stats["ks_distance"] <= stats["ks_critical_0.001"]
                dist_gate = ok if dist_gate is None else (dist_gate and ok)
    if "estimator_dist" in config.analyses:
        gates["estimator_dist"] = dist_gate

    if "lan_check" in config.analyses:
        analyses["lan_check"], gates["lan_check"] = _lan_analysis(
            config, replications)
    if "hellinger_suite" in config.analyses:
        report = hellinger_bound_report(
            config.model, config.schedule,
            thetas=_default_thetas(config), n_grid=config.n_grid,
            u_grid=np.arange(-5.0, 5.0 + 1e-9, 0.5))
        analyses["hellinger_suite"] = report
        gates["hellinger_suite"] = report["passed"]
    if "charfn_check" in config.analyses:
        sup = {int(n): charfn_grid_distance(config, int(n))
               for n in config.n_grid}
        vals = list(sup.values())
        decreasing = all(b < a for a, b in zip(vals, vals[1:]))
        analyses["charfn_check"] = {"sup_distance": sup,
                                    "strictly_decreasing": decreasing}
        gates["charfn_check"] = decreasing if len(sup) > 1 else None
    if "limit_moments" in config.analyses and zeta_ref is not None:
        analyses["limit_moments"] = {
            "E_eta2": float((eta_ref ** 2).mean()),
            "E_eta2_se": float((eta_ref ** 2).std() / math.sqrt(eta_ref.size)),
            "E_zeta2": float((zeta_ref ** 2).mean()),
            "E_zeta2_se": float((zeta_ref ** 2).std() / math.sqrt(zeta_ref.size)),
        }

    if config.schedule.regime == "slow":
        analyses["delta_n"] = {
            int(n): _moment_dict([r.delta_n_stat for r in replications
                                  if r.n == n])
            for n in config.n_grid}
    if config.schedule.regime == "fast":
        analyses["mle_note"] = ("fast-regime MLE statistics are exploratory: "
                                "no supporting limit theory")

    return ExperimentReport(
        config=config, replications=replications, failures=failures,
        summary_rows=summary_rows, analyses=analyses, gates=gates,
        reference_seed=reference_seed, wall_time_s=time.time() - t_start)


def _moment_dict(values) -> dict:
    arr = np.asarray([v for v in values if v is not None], dtype=float)
    return {"mean": float(arr.mean()), "variance": float(arr.var(ddof=1)),
            "count": int(arr.size)}


def _error_stats(config, n, estimator, errs, reps, zeta_ref, eta_ref) -> dict:
    stats = {
        "mean_norm_err": float(errs.mean()),
        "var_norm_err": float(errs.var(ddof=1)),
        "second_moment_norm_err": float((errs ** 2).mean()),
        "fourth_moment_norm_err": float((errs ** 4).mean()),
        "mean_abs_norm_err": float(np.abs(errs).mean()),
        "boundary_fraction": float(np.mean([r.boundary_flag for r in reps])),
    }
    regime = config.schedule.regime
    if regime in ("slow", "fixed_delta"):
        sd = _reference_sd(config, n)
        stats["ks_distance"] = ks_distance(errs, lambda x: normal_cdf(x, sd))
        stats["ks_critical_0.001"] = ks_critical_value(errs.size)
    elif regime == "fast":
        ref = zeta_ref if estimator == "bayes" else eta_ref
        stats["ks_distance"] = ks_distance(errs, ref)
        stats["ks_critical_0.001"] = ks_critical_value(errs.size,
                                                       m=ref.size)
    else:
        stats["ks_distance"] = float("nan")
        stats["ks_critical_0.001"] = float("nan")
    return stats


def _lan_analysis(config, replications):
    """Compare ln Z_n(u) moments with the quadratic-expansion prediction at
    the largest n.  Only the slow regime is gated (the prediction is its
    local-normality statement), and only at |u| <= 1 (larger u converge
    later); other regimes record the moments for inspection."""
    n_max = max(config.n_grid)
    model_n = config.model_at(n_max)
    F = fisher_F(model_n, config.theta_true)
    rows = {}
    ok = True
    gated = False
    lnz = np.array([r.ln_z for r in replications if r.n == n_max])
    for j, u in enumerate(config.lan_u_grid):
        vals = lnz[:, j]
        vals = vals[np.isfinite(vals)]
        if vals.size < 2:
            continue
        mean, var = float(vals.mean()), float(vals.var(ddof=1))
        se_mean = math.sqrt(var / vals.size)
        se_var = var * math.sqrt(2.0 / (vals.size - 1))
        row = {"mean": mean, "variance": var,
               "predicted_mean": -u * u * F / 2.0,
               "predicted_variance": u * u * F,
               "mean_se": se_mean, "variance_se": se_var}
        rows[f"u={u:g}"] = row
        if config.schedule.regime == "slow" and abs(u) <= 1.0:
            gated = True
            ok = ok and abs(mean - row["predicted_mean"]) <= 4.0 * se_mean
            ok = ok and abs(var - row["predicted_variance"]) <= 4.0 * se_var
    return {"n": int(n_max), "F": F, "moments": rows}, (ok if gated else None)


def _default_thetas(config) -> tuple:
    alpha, beta = config.model.alpha, config.model.beta
    return (alpha + 0.1 * (beta - alpha), 0.5 * (alpha + beta),
            beta - 0.1 * (beta - alpha))


def hellinger_bound_report(model: IntensityModel, schedule: RateSchedule,
                           thetas, n_grid, u_grid, slack: float = 1e-9,
                           collect_worst: bool = True) -> dict:
    """Deterministic inequality suite for the Hellinger-type oracles.

    Checks the square-increment bound (quadratic in |u-v| with
    C = max(4, r^2/(4 min psi)) under the slow schedule, linear with C = |r|
    under the fast schedule) and the half-moment tail bound with
    kappa = r^2 / (12 (max psi + r)), on the full (theta, n, u[, v]) grid.
    Grid points whose shifted parameter leaves (alpha, beta) are skipped.
    """
    r = model.r
    lam_lo, lam_hi = model.psi.min(), model.psi.max()
    kappa = r * r / (12.0 * (lam_hi + r))
    if schedule.regime == "fast":
        c_inc, inc_rule = abs(r), "linear"
    else:
        c_inc, inc_rule = max(4.0, r * r / (4.0 * lam_lo)), "quadratic"

    u_grid = np.asarray(u_grid, dtype=float)
    worst_inc = -math.inf
    worst_half = -math.inf
    checked_inc = checked_half = 0
    for n in n_grid:
        n = int(n)
        model_n = model.with_delta(schedule.delta_of(n))
        phi = schedule.phi_of(n)
        for theta in thetas:
            us = u_grid[(theta + u_grid * phi > model.alpha)
                        & (theta + u_grid * phi < model.beta)]
            half = np.array([hellinger_half_moment(model_n, theta, u,
                                                   schedule, n) for u in us])
            bound = np.exp(-kappa * np.minimum(np.abs(us), us * us))
            worst_half = max(worst_half, float((half - bound).max()))
            checked_half += us.size
            for i, u in enumerate(us):
                for v in us[i + 1:]:
                    val = hellinger_increment(model_n, theta, u, v,
                                              schedule, n)
                    gap = abs(u - v) if inc_rule == "linear" \
                        else (u - v) ** 2
                    worst_inc = max(worst_inc, val - c_inc * gap)
                    checked_inc += 1
    passed = worst_inc <= slack and worst_half <= slack
    return {"regime": schedule.regime, "C_increment": c_inc,
            "increment_rule": inc_rule, "kappa": kappa,
            "checked_increment_pairs": checked_inc,
            "checked_half_moments": checked_half,
            "worst_increment_slack": worst_inc,
            "worst_half_moment_slack": worst_half,
            "passed": bool(passed)}


_CHARFN_US = (0.5, 1.0, 1.5, 2.0, 2.5)
_CHARFN_XS = (-1.0, -0.5, 0.5, 1.0)


def charfn_grid_distance(config: ExperimentConfig, n: int,
                         us=_CHARFN_US, xs=_CHARFN_XS) -> float:
    """Sup over the (u, v, x, y) grid (0 <= u < v) of the distance between
    the finite-n and limit joint characteristic functions."""
    model_n = config.model_at(n)
    theta = config.theta_true
    a, b = limit_levels(model_n, theta)
    sup = 0.0
    for i, u in enumerate(us):
        for v in us[i + 1:]:
            for x in xs:
                for y in xs:
                    fin = char_fn_log_lr(model_n, theta, n, u, v, x, y)
                    lim = limit_char_fn(a, b, u, v, x, y)
                    sup = max(sup, abs(fin - lim))
    return sup


# -- report emission ---------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_report(report: ExperimentReport, output_dir, svg: bool = False) -> list:
    """Write manifest.json, summary.csv, replications.csv, analyses.json and
    (optionally) SVG figures.  Returns the list of paths written."""
    os.makedirs(output_dir, exist_ok=True)
    written = []

    def _path(name):
        p = os.path.join(output_dir, name)
        written.append(p)
        return p

    try:
        manifest = {
            "config": report.config.to_dict(),
            "master_seed": int(report.config.master_seed),
            "reference_seed": int(report.reference_seed),
            "version": __version__,
            "wall_time_s": report.wall_time_s,
            "failures": report.failures,
            "gates": report.gates,
        }
        with open(_path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)

        with open(_path("summary.csv"), "w") as fh:
            fh.write("n,estimator,statistic,value\n")
            for n, est, stat, value in report.summary_rows:
                fh.write(f"{n},{est},{stat},{_fmt(value)}\n")

        u_cols = [f"lnz_u{u:g}" for u in report.config.lan_u_grid] \
            if "lan_check" in report.config.analyses else []
        with open(_path("replications.csv"), "w") as fh:
            fh.write("n,replication_index,seed,mle,bayes,norm_err_mle,"
                     "norm_err_bayes,boundary_flag,delta_n"
                     + ("," if u_cols else "") + ",".join(u_cols) + "\n")
            for r in sorted(report.replications,
                            key=lambda r: (r.n, r.replication_index)):
                row = [str(r.n), str(r.replication_index), str(r.seed),
                       _fmt(r.mle), _fmt(r.bayes), _fmt(r.norm_err_mle),
                       _fmt(r.norm_err_bayes), _fmt(r.boundary_flag),
                       "" if r.delta_n_stat is None else _fmt(r.delta_n_stat)]
                row += [_fmt(v) for v in r.ln_z]
                fh.write(",".join(row) + "\n")

        with open(_path("analyses.json"), "w") as fh:
            json.dump(report.analyses, fh, indent=2, sort_keys=True)

        if svg:
            from . import plots
            written.extend(plots.render_report_figures(report, output_dir))
    except OSError as exc:
        raise OSError(f"cannot write report under {output_dir}: {exc}") from exc
    return written


def dump_trajectories(config: ExperimentConfig, output_dir,
                      replication_index: int = 0) -> list:
    """Write one trajectory CSV per n in the grid."""
    os.makedirs(output_dir, exist_ok=True)
    written = []
    for n in config.n_grid:
        sample = sample_observations(config.model_at(int(n)),
                                     config.theta_true, int(n),
                                     config.master_seed, replication_index)
        path = os.path.join(
            output_dir, f"events_n{int(n)}_rep{replication_index}.csv")
        write_sample_csv(sample, path)
        written.append(path)
    return written
