"""Limit likelihood-ratio processes and their argmax / mean functionals.

The change-point limit is a two-sided process: on each side the log-process
is linear drift plus a scaled Poisson counting process, so paths are
piecewise exponential.  Both the argmax and the mean functional

    zeta = int u Z(u) du / int Z(u) du

therefore reduce to exact per-segment formulas; integration over the real
line is truncated to a window grown adaptively until both functionals are
stable.  The Gaussian limit of the regular regime is included for the
slow-case reference distribution.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .rng import Stream, derive_keys

Argmax = namedtuple("Argmax", "u log_value truncated")
LimitDraw = namedtuple("LimitDraw", "eta zeta truncated window")

_MAX_DOUBLINGS = 16
_ZETA_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class TwoSidedPoissonPath:
    """Jump times of the two independent streams driving the limit process.

    Rates: `b` on the plus side, `a` on the minus side (times are stored as
    nonnegative offsets into each side's window [0, window]).
    """

    a: float
    b: float
    window: float
    plus_jumps: np.ndarray
    minus_jumps: np.ndarray

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.a == self.b:
            raise ValueError("need positive rates a != b")
        if self.window <= 0:
            raise ValueError("need a positive window")
        for arr in (self.plus_jumps, self.minus_jumps):
            arr = np.asarray(arr, dtype=float)
            if arr.size and (arr[0] < 0 or arr[-1] > self.window
                             or np.any(np.diff(arr) <= 0)):
                raise ValueError("jump times must be sorted within [0, window]")

    def sides(self):
        """(jumps, jump_size, slope) per side, as functions of |u|."""
        la, lb = math.log(self.a / self.b), math.log(self.b / self.a)
        plus = (np.asarray(self.plus_jumps, dtype=float), la, self.b - self.a)
        minus = (np.asarray(self.minus_jumps, dtype=float), lb,
                 -(self.b - self.a))
        return plus, minus


@dataclass(frozen=True, eq=False)
class RhoPath:
    """One-parameter form of the limit process: drift -1, jumps +/- rho."""

    rho: float
    window: float
    plus_jumps: np.ndarray
    minus_jumps: np.ndarray

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("need rho > 0")
        if self.window <= 0:
            raise ValueError("need a positive window")

    def sides(self):
        plus = (np.asarray(self.plus_jumps, dtype=float), self.rho, -1.0)
        minus = (np.asarray(self.minus_jumps, dtype=float), -self.rho, 1.0)
        return plus, minus

    @staticmethod
    def rates(rho: float) -> tuple[float, float]:
        return 1.0 / math.expm1(rho), 1.0 / (-math.expm1(-rho))


def sample_zstar_path(a: float, b: float, window: float,
                      rng_stream: Stream) -> TwoSidedPoissonPath:
    from .sampling import sample_homogeneous_stream
    plus = sample_homogeneous_stream(b, window, rng_stream.fork(1))
    minus = sample_homogeneous_stream(a, window, rng_stream.fork(2))
    return TwoSidedPoissonPath(a=a, b=b, window=window, plus_jumps=plus,
                               minus_jumps=minus)


def sample_rho_path(rho: float, window: float, rng_stream: Stream) -> RhoPath:
    from .sampling import sample_homogeneous_stream
    rp, rm = RhoPath.rates(rho)
    plus = sample_homogeneous_stream(rp, window, rng_stream.fork(1))
    minus = sample_homogeneous_stream(rm, window, rng_stream.fork(2))
    return RhoPath(rho=rho, window=window, plus_jumps=plus, minus_jumps=minus)


def sample_gaussian_limit(F: float, rng_stream: Stream, size: int | None = None):
    """Draws from the centered normal with variance 1/F (the argmax law of
    the Gaussian-exponential limit process)."""
    if F <= 0:
        raise ValueError("need F > 0")
    z = rng_stream.normal(1 if size is None else size) / math.sqrt(F)
    return float(z[0]) if size is None else z


def _side_log(jumps, jump_size, slope, y):
    y = np.asarray(y, dtype=float)
    return slope * y + jump_size * np.searchsorted(jumps, y, side="right")


def eval_zstar_log(path, u):
    """log of the limit process at local parameter u (cadlag in u)."""
    plus, minus = path.sides()
    u_arr = np.asarray(u, dtype=float)
    if np.any(np.abs(u_arr) > path.window):
        raise ValueError("u outside the simulated window")
    pj, ps, pd = plus
    mj, ms, md = minus
    out = np.where(u_arr >= 0.0,
                   _side_log(pj, ps, pd, np.maximum(u_arr, 0.0)),
                   _side_log(mj, ms, md, np.maximum(-u_arr, 0.0)))
    return out if np.ndim(u) else float(out)


_ARANGE = np.arange(1.0, 1025.0)


def _arange1(n: int) -> np.ndarray:
    """Read-mostly cache of [1.0, 2.0, ...]; returns a length-n view."""
    global _ARANGE
    if n > _ARANGE.size:
        _ARANGE = np.arange(1.0, float(max(n, 2 * _ARANGE.size)) + 0.5)
    return _ARANGE[:n]


class _SideState:
    """Post-jump log values for one side, evaluable at nested sub-windows.

    The log-process on a side is l(y) = slope*y + jump_size*N(y); the sup
    candidates are the origin, the window end and the best jump point (both
    one-sided limits there, which share an argmax since pre = post - size).
    """

    __slots__ = ("jumps", "jump_size", "slope", "window", "post", "_ep",
                 "_shift", "_pre_factor")

    def __init__(self, jumps_all, jump_size, slope, window):
        cut = np.searchsorted(jumps_all, window, side="right")
        self.jumps = jumps_all[:cut]
        self.jump_size = jump_size
        self.slope = slope
        self.window = window
        self.post = slope * self.jumps + jump_size * _arange1(cut)
        self._ep = None
        self._shift = None
        self._pre_factor = math.exp(-jump_size)

    def _cut(self, w: float) -> int:
        if w == self.window:
            return self.jumps.size
        return int(np.searchsorted(self.jumps, w, side="right"))

    def sup(self, w: float | None = None):
        """(sup value, location of the smallest-y maximizer) on [0, w]."""
        w = self.window if w is None else w
        cut = self._cut(w)
        end = self.slope * w + self.jump_size * cut
        best, loc = 0.0, 0.0
        if cut:
            k = int(np.argmax(self.post[:cut]))  # first max = smallest y
            for v, y in ((float(self.post[k]), float(self.jumps[k])),
                         (float(self.post[k]) - self.jump_size,
                          float(self.jumps[k]))):
                if v > best or (v == best and y < loc):
                    best, loc = v, y
        if end > best or (end == best and w < loc):
            best, loc = end, w
        return best, loc

    def prepare(self, shift: float) -> None:
        self._shift = shift
        self._ep = np.exp(self.post - shift)

    def integrals(self, w: float):
        """(int e^(l-shift), int y e^(l-shift)) over [0, w], w <= window.

        Per segment int e^(c+s(y-y0)) dy = (e1-e0)/s and int y e^(...) dy =
        (e1*y1 - e0*y0)/s - (e1-e0)/s^2; after the max shift every
        exponential is <= 1, so the sums collapse to three reductions.
        """
        cut = self._cut(w)
        ep = self._ep[:cut]
        jumps = self.jumps[:cut]
        sum_ep = float(ep.sum())
        e_origin = math.exp(-self._shift)
        e_end = math.exp(self.slope * w + self.jump_size * cut - self._shift)
        sum_e0 = e_origin + sum_ep
        sum_e1 = sum_ep * self._pre_factor + e_end
        d = float(np.dot(ep, jumps))
        dot_e1_y1 = d * self._pre_factor + e_end * w
        i0 = (sum_e1 - sum_e0) / self.slope
        i1 = (dot_e1_y1 - d) / self.slope - i0 / self.slope
        return i0, i1


def _functionals_at(stp: _SideState, stm: _SideState, w: float):
    """(argmax, mean functional) of the two-sided process on [-w, w].

    Requires prepare() on both sides; tie-break on the argmax is smallest
    |u|, then the negative side.
    """
    best_p, loc_p = stp.sup(w)
    best_m, loc_m = stm.sup(w)
    if best_p > best_m:
        eta = loc_p
    elif best_m > best_p:
        eta = -loc_m
    else:
        eta = -loc_m if loc_m <= abs(loc_p) else loc_p
    i0p, i1p = stp.integrals(w)
    i0m, i1m = stm.integrals(w)
    zeta = (i1p - i1m) / (i0p + i0m)
    return float(eta), float(zeta), max(best_p, best_m)


def argsup_zstar(path) -> Argmax:
    """Location of the supremum over [-window, window].

    Tie-break: smallest |u|, then the negative side.  `truncated` flags a
    supremum sitting on the window edge.
    """
    plus, minus = path.sides()
    stp = _SideState(*plus, path.window)
    stm = _SideState(*minus, path.window)
    best_p, loc_p = stp.sup()
    best_m, loc_m = stm.sup()
    if best_p > best_m:
        u, best = loc_p, best_p
    elif best_m > best_p:
        u, best = -loc_m, best_m
    else:
        u, best = (-loc_m if loc_m <= abs(loc_p) else loc_p), best_p
    return Argmax(u=float(u), log_value=float(best),
                  truncated=bool(abs(u) >= path.window))


def bayes_functional_zstar(path) -> float:
    """Mean functional int u Z(u) du / int Z(u) du over the stored window."""
    plus, minus = path.sides()
    stp = _SideState(*plus, path.window)
    stm = _SideState(*minus, path.window)
    # common max shift keeps every exponential in range
    shift = max(stp.sup()[0], stm.sup()[0])
    stp.prepare(shift)
    stm.prepare(shift)
    _, zeta, _ = _functionals_at(stp, stm, path.window)
    return zeta


class _SideSampler:
    """Extendable homogeneous jump stream for one side."""

    def __init__(self, stream: Stream, rate: float):
        self.stream = stream
        self.rate = rate
        self.jumps = np.empty(0)
        self._last = 0.0

    def extend(self, limit: float) -> np.ndarray:
        """All jumps drawn so far, covering at least [0, limit]."""
        while self._last <= limit:
            block = max(16, int(self.rate * (limit - self._last) + 16))
            gaps = self.stream.exponential(1.0 / self.rate, block)
            new = self._last + np.cumsum(gaps)
            self.jumps = np.concatenate([self.jumps, new])
            self._last = float(new[-1])
        return self.jumps


def _drift(rate, jump_size, slope) -> float:
    return slope + rate * jump_size


def limit_functionals(rng_stream: Stream, a: float | None = None,
                      b: float | None = None, rho: float | None = None,
                      u0: float | None = None) -> LimitDraw:
    """One draw of (argmax, mean functional) with an adaptive window.

    Give either (a, b) or rho.  The window starts at 50 / min(1, |drift|)
    and doubles until the argmax location and the mean functional are
    stable to relative 1e-8.
    """
    if rho is not None:
        if a is not None or b is not None:
            raise ValueError("give either rho or (a, b)")
        rate_p, rate_m = RhoPath.rates(rho)
        side_p = (rate_p, rho, -1.0)
        side_m = (rate_m, -rho, 1.0)
    else:
        if a is None or b is None:
            raise ValueError("give either rho or (a, b)")
        if a <= 0 or b <= 0 or a == b:
            raise ValueError("need positive rates a != b")
        side_p = (b, math.log(a / b), b - a)
        side_m = (a, math.log(b / a), -(b - a))

    for rate, jump, slope in (side_p, side_m):
        if _drift(rate, jump, slope) >= 0:
            raise ValueError("the log-process must drift to -infinity")
    if u0 is None:
        u0 = 50.0 / min(1.0, abs(_drift(*side_p)), abs(_drift(*side_m)))

    sampler_p = _SideSampler(rng_stream.fork(1), side_p[0])
    sampler_m = _SideSampler(rng_stream.fork(2), side_m[0])
    window = u0
    eta = zeta = None
    for _ in range(_MAX_DOUBLINGS):
        # evaluate both the window and its double from one prepared state
        wide = 2.0 * window
        stp = _SideState(sampler_p.extend(wide), side_p[1], side_p[2], wide)
        stm = _SideState(sampler_m.extend(wide), side_m[1], side_m[2], wide)
        shift = max(stp.sup()[0], stm.sup()[0])
        stp.prepare(shift)
        stm.prepare(shift)
        eta_in, zeta_in, _ = _functionals_at(stp, stm, window)
        eta, zeta, _ = _functionals_at(stp, stm, wide)
        if (eta == eta_in
                and abs(zeta - zeta_in) <= _ZETA_RTOL * max(1.0, abs(zeta))):
            return LimitDraw(eta=eta, zeta=zeta, truncated=False, window=wide)
        window = wide
    return LimitDraw(eta=eta, zeta=zeta, truncated=True, window=window)


def _draw_range(args):
    lo, hi, master_seed, a, b, rho = args
    keys = derive_keys(master_seed, hi)[lo:]
    etas = np.empty(hi - lo)
    zetas = np.empty(hi - lo)
    truncated = 0
    for i in range(hi - lo):
        draw = limit_functionals(Stream(int(keys[i])), a=a, b=b, rho=rho)
        etas[i] = draw.eta
        zetas[i] = draw.zeta
        truncated += bool(draw.truncated)
    return etas, zetas, truncated


def reference_samples(M: int, master_seed: int, a: float | None = None,
                      b: float | None = None, rho: float | None = None,
                      processes: int = 1):
    """M independent draws of (eta, zeta); deterministic under the seed
    regardless of the process count (draw i uses the stream keyed by i).

    Returns (etas, zetas, truncated_count).
    """
    if M < 1:
        raise ValueError("need M >= 1")
    args = [(lo, min(lo + _DRAW_CHUNK, M), master_seed, a, b, rho)
            for lo in range(0, M, _DRAW_CHUNK)]
    if processes > 1 and len(args) > 1:
        import multiprocessing
        with multiprocessing.Pool(processes) as pool:
            parts = pool.map(_draw_range, args)
    else:
        parts = [_draw_range(t) for t in args]
    etas = np.concatenate([p[0] for p in parts])
    zetas = np.concatenate([p[1] for p in parts])
    return etas, zetas, sum(p[2] for p in parts)


_DRAW_CHUNK = 4096


def reference_sample_zeta(a: float, b: float, M: int,
                          master_seed: int) -> np.ndarray:
    """M draws of the limit law of the scaled posterior-mean error."""
    return reference_samples(M, master_seed, a=a, b=b)[1]
