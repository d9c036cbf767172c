"""Intensity family: baseline plus a linear ramp of height r over width delta.

The rate at time t under parameter theta is

    psi(t) + (r/delta) * (t - theta)   on [theta, theta + delta)
    psi(t) + r                         on [theta + delta, tau]

with the step intensity psi(t) + r*1[t >= theta] recovered at delta = 0.
All types are immutable; operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .quadrature import integrate_with_breakpoints


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Baseline:
    """Strictly positive baseline rate, constant or piecewise linear.

    A constant baseline has `level` set and empty knots; a piecewise-linear
    one interpolates `knot_rates` over `knot_times`, which must start at 0,
    end at the horizon and be strictly increasing.
    """

    level: float | None = None
    knot_times: np.ndarray | None = None
    knot_rates: np.ndarray | None = None

    @classmethod
    def constant(cls, rate: float) -> "Baseline":
        if rate <= 0:
            raise ValueError("baseline rate must be strictly positive")
        return cls(level=float(rate))

    @classmethod
    def piecewise(cls, knots) -> "Baseline":
        knots = sorted((float(t), float(v)) for t, v in knots)
        if len(knots) < 2:
            raise ValueError("piecewise baseline needs at least two knots")
        times = np.array([t for t, _ in knots])
        rates = np.array([v for _, v in knots])
        if np.any(np.diff(times) <= 0):
            raise ValueError("baseline knot times must be strictly increasing")
        if np.any(rates <= 0):
            raise ValueError("baseline must be strictly positive")
        return cls(knot_times=_readonly(times), knot_rates=_readonly(rates))

    @property
    def is_constant(self) -> bool:
        return self.level is not None

    def __call__(self, t):
        if self.is_constant:
            return np.full_like(np.asarray(t, dtype=float), self.level) \
                if np.ndim(t) else self.level
        return np.interp(t, self.knot_times, self.knot_rates)

    def min(self) -> float:
        # piecewise-linear functions attain extrema at knots
        return self.level if self.is_constant else float(self.knot_rates.min())

    def max(self) -> float:
        return self.level if self.is_constant else float(self.knot_rates.max())

    def integral(self, t):
        """Exact integral of the baseline over [0, t] (trapezoid per knot span)."""
        if self.is_constant:
            return self.level * np.asarray(t, dtype=float) if np.ndim(t) \
                else self.level * t
        kt, kv = self.knot_times, self.knot_rates
        prefix = np.concatenate([[0.0], np.cumsum(
            0.5 * (kv[1:] + kv[:-1]) * np.diff(kt))])
        t_arr = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(kt, t_arr, side="right") - 1, 0,
                      len(kt) - 2)
        dt = t_arr - kt[idx]
        slope = (kv[idx + 1] - kv[idx]) / (kt[idx + 1] - kt[idx])
        out = prefix[idx] + kv[idx] * dt + 0.5 * slope * dt * dt
        return out if np.ndim(t) else float(out)

    def knots_in(self, lo: float, hi: float) -> np.ndarray:
        if self.is_constant:
            return np.empty(0)
        kt = self.knot_times
        return kt[(kt > lo) & (kt < hi)]

    def validate_span(self, tau: float) -> None:
        if self.is_constant:
            return
        if self.knot_times[0] != 0.0 or self.knot_times[-1] != tau:
            raise ValueError("baseline knots must span [0, tau] exactly")


@dataclass(frozen=True)
class IntensityModel:
    """Ramp intensity family on [0, tau] with parameter interval (alpha, beta)."""

    psi: Baseline
    r: float
    delta: float
    tau: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0 < self.alpha < self.beta < self.tau:
            raise ValueError("need 0 < alpha < beta < tau")
        if self.delta < 0:
            raise ValueError("transition width delta must be >= 0")
        if self.beta + self.delta > self.tau:
            raise ValueError(
                "beta + delta must not exceed tau (ramp must fit in the window)")
        self.psi.validate_span(self.tau)
        if self.r <= -self.psi.min():
            raise ValueError("need r > -min(psi) so the intensity stays positive")

    def with_delta(self, delta: float) -> "IntensityModel":
        return replace(self, delta=float(delta))

    def check_theta(self, theta: float) -> None:
        if not self.alpha < theta < self.beta:
            raise ValueError(f"theta={theta} outside ({self.alpha}, {self.beta})")

    def ramp(self, theta: float, t):
        """The ramp contribution r * clip((t - theta)/delta, 0, 1)."""
        t = np.asarray(t, dtype=float)
        if self.delta > 0:
            frac = np.clip((t - theta) / self.delta, 0.0, 1.0)
        else:
            frac = (t >= theta).astype(float)
        return self.r * frac

    def breakpoints(self, thetas) -> np.ndarray:
        """Ramp edges for the given thetas plus baseline knots, within (0, tau)."""
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        pts = [thetas, thetas + self.delta] if self.delta > 0 else [thetas]
        pts = np.concatenate(pts + [self.psi.knots_in(0.0, self.tau)])
        return np.unique(pts[(pts > 0.0) & (pts < self.tau)])


def eval_intensity(model: IntensityModel, theta: float, t):
    """Rate at time(s) t; raises on t outside [0, tau] or theta outside (alpha, beta)."""
    model.check_theta(theta)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > model.tau):
        raise ValueError("t outside the observation window [0, tau]")
    out = model.psi(t_arr) + model.ramp(theta, t_arr)
    return out if np.ndim(t) else float(out)


def cumulative_intensity(model: IntensityModel, theta: float, t):
    """Expected count on [0, t]: exact antiderivative of the intensity."""
    model.check_theta(theta)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > model.tau):
        raise ValueError("t outside the observation window [0, tau]")
    r, d = model.r, model.delta
    if d > 0:
        # 0 before the ramp, quadratic across it, affine after
        u = np.clip(t_arr - theta, 0.0, d)
        ramp_int = (r / (2.0 * d)) * u * u + r * np.maximum(t_arr - theta - d, 0.0)
    else:
        ramp_int = r * np.maximum(t_arr - theta, 0.0)
    out = model.psi.integral(t_arr) + ramp_int
    return out if np.ndim(t) else float(out)


def fisher_F(model: IntensityModel, theta: float) -> float:
    """Scalar information level r * ln((psi(theta)+r)/psi(theta))."""
    model.check_theta(theta)
    if model.r == 0.0:
        return 0.0
    base = model.psi(theta)
    return model.r * math.log((base + model.r) / base)


def fisher_information_regular(model: IntensityModel, theta: float,
                               tol: float = 1e-10) -> float:
    """Fisher information of the fixed-width model, by quadrature over the ramp.

    Integrates (r/delta)^2 / intensity over [theta, theta+delta]; for a
    constant baseline this equals (r/delta) * ln((lambda0+r)/lambda0).
    """
    model.check_theta(theta)
    if model.delta <= 0:
        raise ValueError("fisher_information_regular requires delta > 0")
    if model.r == 0.0:
        return 0.0
    slope = model.r / model.delta

    def integrand(t):
        return slope * slope / eval_intensity(model, theta, t)

    lo, hi = theta, theta + model.delta
    knots = model.psi.knots_in(lo, hi)
    val, _ = integrate_with_breakpoints(integrand, lo, hi, knots, tol=tol)
    return val


def limit_levels(model: IntensityModel, theta: float) -> tuple[float, float]:
    """Pre- and post-transition rates (a, b) = (psi(theta), psi(theta)+r)."""
    model.check_theta(theta)
    base = float(model.psi(theta))
    return base, base + model.r
