"""Shared fixtures: canonical models and the slow-regime campaign reused by
the acceptance suite and the estimator moment checks."""

import os

import pytest

from scpp.estimators import Prior
from scpp.experiment import ExperimentConfig, run_experiment
from scpp.intensity import Baseline, IntensityModel
from scpp.likelihood import RateSchedule

WORKERS = min(8, (os.cpu_count() or 1) * 4)


def make_model(lam0=2.0, r=1.0, delta=0.01, tau=1.0, alpha=0.25, beta=0.75):
    return IntensityModel(psi=Baseline.constant(lam0), r=r, delta=delta,
                          tau=tau, alpha=alpha, beta=beta)


@pytest.fixture(scope="session")
def slow_config():
    # the slow-regime verification campaign: lambda0=2, r=1, delta_n=n^(-1/2)
    return ExperimentConfig(
        model=make_model(lam0=2.0, r=1.0, delta=0.0),
        schedule=RateSchedule(regime="slow", coef=1.0, power=0.5),
        n_grid=(10_000,),
        theta_true=0.5,
        replications=2000,
        prior=Prior.uniform(),
        master_seed=20260810,
        analyses=("estimator_dist", "lan_check"),
        output_dir="unused",
    )


@pytest.fixture(scope="session")
def slow_report(slow_config):
    """The full slow-case run (shared: it is the expensive one)."""
    return run_experiment(slow_config, threads=8)
