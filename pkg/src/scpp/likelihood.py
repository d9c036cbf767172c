"""Log-likelihood, normalized likelihood ratios, and deterministic oracles.

The log-likelihood against the unit-rate reference is

    sum_j sum_i ln lambda_theta(t_ij) - n * (Lambda_theta(tau) - tau).

Only events inside the ramp window [theta, theta+delta) carry a
theta-dependent event term, which makes bulk evaluation over many thetas
cheap: prefix/suffix sums handle everything outside the ramp.

The Hellinger and characteristic-function oracles are deterministic
quadratures of closed-form Poisson identities; they back the bound suite
and the Monte Carlo cross-checks.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .intensity import IntensityModel
from .quadrature import integrate_with_breakpoints
from .sampling import SampleSet

_CHUNK = 1 << 22


@dataclass(frozen=True)
class RateSchedule:
    """Transition-width rule delta_n = coef * n^(-power) plus the matching
    likelihood normalization rate.

    regime: "slow" (phi = sqrt(delta_n/n)), "fast" or "critical" (phi = 1/n),
    "fixed_delta" (phi = 1/sqrt(n)).  power = 0 encodes a constant width.
    """

    regime: str
    coef: float
    power: float = 0.0

    _REGIMES = ("slow", "fast", "critical", "fixed_delta")

    def __post_init__(self):
        if self.regime not in self._REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.coef <= 0 or self.power < 0:
            raise ValueError("need coef > 0 and power >= 0")
        if self.regime == "critical" and self.power != 1.0:
            raise ValueError("critical regime means delta_n = c/n (power = 1)")
        if self.regime == "fixed_delta" and self.power != 0.0:
            raise ValueError("fixed_delta regime requires a constant width")

    def delta_of(self, n: int) -> float:
        return self.coef * float(n) ** (-self.power)

    def phi_of(self, n: int) -> float:
        if self.regime == "slow":
            return math.sqrt(self.delta_of(n) / n)
        if self.regime in ("fast", "critical"):
            return 1.0 / n
        return 1.0 / math.sqrt(n)

    def check_grid(self, n_grid) -> None:
        """Regime gate: the n*delta_n trend must match the claimed regime."""
        n_grid = list(n_grid)
        nd = [n * self.delta_of(n) for n in n_grid]
        if self.regime == "slow":
            if any(b <= a for a, b in zip(nd, nd[1:])) or nd[-1] <= 1.0:
                raise ValueError(
                    "slow regime requires n*delta_n increasing and > 1 at the "
                    f"largest n (got {nd})")
        elif self.regime == "fast":
            if any(b >= a for a, b in zip(nd, nd[1:])) or nd[-1] >= 1.0:
                raise ValueError(
                    "fast regime requires n*delta_n decreasing and < 1 at the "
                    f"largest n (got {nd})")


class PooledContext:
    """Per-sample arrays for bulk likelihood evaluation."""

    def __init__(self, sample: SampleSet):
        model = sample.model
        s = sample.pooled_events
        psi_ev = np.asarray(model.psi(s), dtype=float)
        if np.any(psi_ev + min(model.r, 0.0) <= 0.0):
            raise ArithmeticError("intensity not positive at an event")
        self.sample = sample
        self.model = model
        self.n = sample.n
        self.events = s
        self.psi_ev = psi_ev
        # A[k]: sum of ln psi over events before k; B[k]: ln(psi+r) from k on
        self.prefix_pre = np.concatenate([[0.0], np.cumsum(np.log(psi_ev))])
        post = np.log(psi_ev + model.r)
        self.suffix_post = np.concatenate([np.cumsum(post[::-1])[::-1], [0.0]])
        # compensator: n * (Lambda_theta(tau) - tau) = comp_const - n*r*theta
        base_int = float(model.psi.integral(model.tau))
        self.comp_const = self.n * (base_int + model.r * (model.tau - 0.5 * model.delta)
                                    - model.tau)
        self.comp_slope = self.n * model.r


_contexts: "weakref.WeakKeyDictionary[SampleSet, PooledContext]" = \
    weakref.WeakKeyDictionary()


def pooled_context(sample: SampleSet) -> PooledContext:
    ctx = _contexts.get(sample)
    if ctx is None:
        ctx = PooledContext(sample)
        _contexts[sample] = ctx
    return ctx


def _ramp_bounds(ctx: PooledContext, thetas: np.ndarray):
    """Indices [i0, i1) of events inside the ramp window of each theta."""
    i0 = np.searchsorted(ctx.events, thetas, side="left")
    i1 = np.searchsorted(ctx.events, thetas + ctx.model.delta, side="left")
    return i0, np.maximum(i1, i0)


def loglik_many(sample: SampleSet, thetas, with_slope: bool = False):
    """Log-likelihood at many thetas (no domain check; internal workhorse).

    With `with_slope`, also returns the derivative of the smooth extension
    that keeps each theta's ramp membership fixed (a subgradient at kinks).
    """
    ctx = pooled_context(sample)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    model = ctx.model
    out = np.empty(thetas.shape)
    slopes = np.empty(thetas.shape) if with_slope else None

    if model.delta == 0.0:
        i0 = np.searchsorted(ctx.events, thetas, side="left")
        out[:] = ctx.prefix_pre[i0] + ctx.suffix_post[i0]
        out -= ctx.comp_const - ctx.comp_slope * thetas
        if with_slope:
            slopes[:] = ctx.comp_slope
            return out, slopes
        return out

    i0, i1 = _ramp_bounds(ctx, thetas)
    out[:] = ctx.prefix_pre[i0] + ctx.suffix_post[i1]
    out -= ctx.comp_const - ctx.comp_slope * thetas
    if with_slope:
        slopes[:] = ctx.comp_slope

    counts = i1 - i0
    total = int(counts.sum())
    if total:
        slope = model.r / model.delta
        const_psi = ctx.model.psi.level if ctx.model.psi.is_constant else None
        start = 0
        while start < len(thetas):
            stop = start
            tally = 0
            while stop < len(thetas) and (tally == 0 or tally +
                                          counts[stop] <= _CHUNK):
                tally += counts[stop]
                stop += 1
            c = counts[start:stop]
            if tally:
                rep = np.repeat(np.arange(stop - start, dtype=np.int32), c)
                base = np.repeat(
                    (i0[start:stop] - np.concatenate(
                        [[0], np.cumsum(c)[:-1]])).astype(np.int64), c)
                pos = np.arange(tally, dtype=np.int64) + base
                lam = ctx.events[pos] - thetas[start:stop][rep]
                lam *= slope
                lam += const_psi if const_psi is not None else ctx.psi_ev[pos]
                out[start:stop] += np.bincount(
                    rep, weights=np.log(lam), minlength=stop - start)
                if with_slope:
                    slopes[start:stop] -= slope * np.bincount(
                        rep, weights=1.0 / lam, minlength=stop - start)
            start = stop
    if with_slope:
        return out, slopes
    return out


def log_likelihood(sample: SampleSet, theta: float) -> float:
    """Log of the likelihood against the unit-intensity reference measure."""
    sample.model.check_theta(theta)
    return float(loglik_many(sample, theta)[0])


def domain_u(model: IntensityModel, theta: float, phi: float):
    """The admissible local-parameter interval (open)."""
    return (model.alpha - theta) / phi, (model.beta - theta) / phi


def log_lr(sample: SampleSet, theta: float, u: float,
           schedule: RateSchedule, n: int) -> float:
    """ln of the normalized likelihood ratio at local parameter u."""
    model = sample.model
    model.check_theta(theta)
    if n != sample.n:
        raise ValueError("n disagrees with the sample size")
    if u == 0.0:
        return 0.0
    phi = schedule.phi_of(n)
    shifted = theta + u * phi
    if not model.alpha < shifted < model.beta:
        raise ValueError(f"u={u} outside the admissible local interval")
    vals = loglik_many(sample, [shifted, theta])
    return float(vals[0] - vals[1])


def log_lr_many(sample: SampleSet, theta: float, us, schedule: RateSchedule):
    """ln Z_n(u) on a grid of u values (NaN where u leaves the domain)."""
    model = sample.model
    phi = schedule.phi_of(sample.n)
    us = np.asarray(us, dtype=float)
    shifted = theta + us * phi
    ok = (shifted > model.alpha) & (shifted < model.beta)
    out = np.full(us.shape, np.nan)
    if ok.any():
        base = loglik_many(sample, theta)[0]
        out[ok] = loglik_many(sample, shifted[ok]) - base
    out[us == 0.0] = 0.0
    return out


def lan_central_term(sample: SampleSet, theta: float, delta_n: float) -> float:
    """The linear term of the local quadratic likelihood expansion:
    a centered, scaled count over the ramp window."""
    if delta_n <= 0:
        raise ValueError("lan_central_term requires delta_n > 0")
    model = sample.model
    model.check_theta(theta)
    if model.delta != delta_n:
        raise ValueError("delta_n must match the sample's transition width")
    ctx = pooled_context(sample)
    s = ctx.events
    i0 = np.searchsorted(s, theta, side="left")
    i1 = np.searchsorted(s, theta + delta_n, side="left")
    base = float(model.psi(theta))
    ramp_vals = base + (model.r / delta_n) * (s[i0:i1] - theta)
    scale = math.sqrt(sample.n * delta_n)
    return float(-model.r / scale * np.sum(1.0 / ramp_vals) + model.r * scale)


def _shifted_rate(model: IntensityModel, theta: float):
    def lam(t):
        return model.psi(t) + model.ramp(theta, t)
    return lam


def _check_shift(model: IntensityModel, theta: float, u: float, phi: float):
    shifted = theta + u * phi
    if not model.alpha < shifted < model.beta:
        raise ValueError(f"u={u} leaves the parameter interval")
    return shifted


def sq_hellinger_integral(model: IntensityModel, t1: float, t2: float,
                          tol: float = 1e-12) -> float:
    """Integral over the window of (sqrt lambda_t1 - sqrt lambda_t2)^2."""
    lam1, lam2 = _shifted_rate(model, t1), _shifted_rate(model, t2)

    def f(t):
        d = np.sqrt(lam1(t)) - np.sqrt(lam2(t))
        return d * d

    bps = model.breakpoints([t1, t2])
    val, _ = integrate_with_breakpoints(f, 0.0, model.tau, bps, tol=tol)
    return val


def hellinger_half_moment(model: IntensityModel, theta: float, u: float,
                          schedule: RateSchedule, n: int) -> float:
    """E sqrt(Z_n(u)), via the exact Poisson Hellinger identity."""
    model.check_theta(theta)
    phi = schedule.phi_of(n)
    shifted = _check_shift(model, theta, u, phi)
    integral = sq_hellinger_integral(model, shifted, theta, tol=2e-10 / n)
    return math.exp(-0.5 * n * integral)


def hellinger_increment(model: IntensityModel, theta: float, u: float,
                        v: float, schedule: RateSchedule, n: int) -> float:
    """E |sqrt Z_n(u) - sqrt Z_n(v)|^2, exactly (not just the upper bound):
    2 - 2 exp{-(n/2) * int (sqrt lambda_u - sqrt lambda_v)^2}."""
    model.check_theta(theta)
    phi = schedule.phi_of(n)
    su = _check_shift(model, theta, u, phi)
    sv = _check_shift(model, theta, v, phi)
    if u == v:
        return 0.0
    integral = sq_hellinger_integral(model, su, sv, tol=2e-10 / n)
    return 2.0 - 2.0 * math.exp(-0.5 * n * integral)


def char_fn_log_lr(model: IntensityModel, theta: float, n: int, u: float,
                   v: float, x: float, y: float) -> complex:
    """Joint characteristic function of (ln Z_n(u), ln Z_n(v)) at (x, y),
    under the change-point normalization phi_n = 1/n.

    Deterministic complex quadrature of the exponent; valid for every sign
    pattern of u, v and r.
    """
    model.check_theta(theta)
    phi = 1.0 / n
    su = _check_shift(model, theta, u, phi)
    sv = _check_shift(model, theta, v, phi)
    lam = _shifted_rate(model, theta)
    lam_u = _shifted_rate(model, su)
    lam_v = _shifted_rate(model, sv)

    def f(t):
        base = lam(t)
        z = 1j * (x * np.log(lam_u(t) / base) + y * np.log(lam_v(t) / base))
        return (np.exp(z) - 1.0) * base

    bps = model.breakpoints([theta, su, sv])
    integral, _ = integrate_with_breakpoints(f, 0.0, model.tau, bps,
                                             tol=1e-11 / n)
    det = 1j * model.r * (u * x + v * y) * n * phi
    return complex(np.exp(det + n * integral))


def _poisson_side(rate: float, log_ratio: float, points) -> complex:
    """E exp{ i * log_ratio * sum_k coef_k N(s_k) } for one Poisson process.

    `points` is a list of (s, coef) with s >= 0; independent increments give
    one factor per segment of the ordered partition.
    """
    pts = sorted((float(s), float(c)) for s, c in points if s > 0.0)
    if not pts:
        return 1.0 + 0.0j
    total = 0.0 + 0.0j
    prev = 0.0
    for j, (s, _) in enumerate(pts):
        weight = sum(c for (sk, c) in pts[j:])
        total += rate * (s - prev) * (np.exp(1j * log_ratio * weight) - 1.0)
        prev = s
    return np.exp(total)


def limit_char_fn(a: float, b: float, u: float, v: float, x: float,
                  y: float) -> complex:
    """Joint characteristic function of the two-sided Poisson limit log-ratio
    at local points (u, v), for arbitrary sign patterns."""
    if a <= 0 or b <= 0 or a == b:
        raise ValueError("need positive rates a != b")
    det = np.exp(1j * (b - a) * (u * x + v * y))
    plus = _poisson_side(b, math.log(a / b),
                         [(s, c) for s, c in ((u, x), (v, y)) if s >= 0.0])
    minus = _poisson_side(a, math.log(b / a),
                          [(-s, c) for s, c in ((u, x), (v, y)) if s <= 0.0])
    return complex(det * plus * minus)
