"""Exact simulation of the observation model and of homogeneous streams.

Default sampler is thinning against the constant envelope
max(psi) + max(r, 0); an inversion sampler for constant baselines serves as
an independent cross-check.  All randomness is counter-indexed per
trajectory, so a sample set is a pure function of
(master_seed, replication_index, trajectory_index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .intensity import IntensityModel, cumulative_intensity, eval_intensity
from .rng import _SUBSPACE, Stream, counter_uniforms, derive_key, derive_keys

_TIE_TAG = 0x7143


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One path: strictly increasing event times in [0, tau]."""

    events: np.ndarray
    tau: float

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=float)
        ev.setflags(write=False)
        object.__setattr__(self, "events", ev)
        if ev.size and (ev[0] < 0.0 or ev[-1] > self.tau):
            raise ValueError("event times outside [0, tau]")
        if ev.size > 1 and np.any(np.diff(ev) <= 0.0):
            raise ValueError("event times must be strictly increasing")

    @property
    def count(self) -> int:
        return int(self.events.size)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """n independent trajectories with their provenance."""

    trajectories: tuple
    model: IntensityModel
    theta_true: float
    seed: int

    @property
    def n(self) -> int:
        return len(self.trajectories)

    @cached_property
    def pooled_events(self) -> np.ndarray:
        """All event times pooled and sorted (the superposed path)."""
        if not self.trajectories:
            return np.empty(0)
        pooled = np.sort(np.concatenate([t.events for t in self.trajectories]))
        pooled.setflags(write=False)
        return pooled

    @property
    def counts(self) -> np.ndarray:
        return np.array([t.count for t in self.trajectories])


def _envelope(model: IntensityModel) -> float:
    return model.psi.max() + max(model.r, 0.0)


def _accepted_times(model, theta, key, attempt=0):
    """Thinning for one trajectory key; pure function of (key, attempt)."""
    if attempt > 0:
        key = derive_key(key, _TIE_TAG, attempt)
    lam_bar = _envelope(model)
    mean = lam_bar * model.tau
    block = max(16, int(mean + 10.0 * math.sqrt(mean) + 16))
    times = []
    offset = 0
    last = 0.0
    while True:
        u = counter_uniforms(np.uint64(key),
                             np.arange(offset, offset + block, dtype=np.uint64))
        gaps = -np.log(u) / lam_bar
        cand = last + np.cumsum(gaps)
        inside = cand <= model.tau
        times.append(cand[inside])
        if not inside.all():
            break
        last = cand[-1]
        offset += block
    cand = np.concatenate(times)
    if cand.size == 0:
        return cand
    idx = np.arange(cand.size, dtype=np.uint64) + np.uint64(_SUBSPACE)
    u2 = counter_uniforms(np.uint64(key), idx)
    lam = eval_intensity(model, theta, cand)
    return cand[u2 * lam_bar < lam]


def sample_trajectory(model: IntensityModel, theta: float,
                      rng_stream: Stream) -> Trajectory:
    """One inhomogeneous path on [0, tau] by thinning.

    The path is a pure function of the stream handle (counter-indexed
    draws), so a stream must be dedicated to one trajectory.
    """
    model.check_theta(theta)
    attempt = 0
    while True:
        ev = _accepted_times(model, theta, rng_stream.key, attempt)
        if ev.size < 2 or np.all(np.diff(ev) > 0.0):
            return Trajectory(events=ev, tau=model.tau)
        attempt += 1  # exact float tie: re-draw from a fresh subspace


def sample_observations(model: IntensityModel, theta: float, n: int,
                        master_seed: int, replication_index: int) -> SampleSet:
    """n independent trajectories; trajectory j is a pure function of
    (master_seed, replication_index, j)."""
    model.check_theta(theta)
    if n < 1:
        raise ValueError("need n >= 1")
    base = derive_key(master_seed, replication_index)
    keys = derive_keys(base, n)

    lam_bar = _envelope(model)
    mean = lam_bar * model.tau
    block = max(16, int(mean + 10.0 * math.sqrt(mean) + 16))
    counters = np.arange(block, dtype=np.uint64)[None, :]
    u = counter_uniforms(keys[:, None], counters)
    cand = np.cumsum(-np.log(u) / lam_bar, axis=1)
    complete = cand[:, -1] > model.tau

    u2 = counter_uniforms(keys[:, None], counters + np.uint64(_SUBSPACE))
    lam = model.psi(cand) + model.ramp(theta, np.clip(cand, 0.0, model.tau))
    accept = (cand <= model.tau) & (u2 * lam_bar < lam)

    flat = cand[accept]
    flat.setflags(write=False)
    counts = accept.sum(axis=1)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    # exact float ties within one trajectory trigger a scalar re-draw
    tie_rows = frozenset()
    if flat.size > 1:
        row = np.repeat(np.arange(n), counts)
        bad = (flat[1:] == flat[:-1]) & (row[1:] == row[:-1])
        if bad.any():
            tie_rows = frozenset(row[1:][bad].tolist())

    trajectories = []
    tau = model.tau
    for jj in range(n):
        if not complete[jj] or jj in tie_rows:
            trajectories.append(sample_trajectory(model, theta,
                                                  Stream(int(keys[jj]))))
        else:
            trajectories.append(
                _trajectory_trusted(flat[offsets[jj]:offsets[jj + 1]], tau))
    return SampleSet(trajectories=tuple(trajectories), model=model,
                     theta_true=theta, seed=base)


def _trajectory_trusted(events: np.ndarray, tau: float) -> Trajectory:
    """Construct without re-validation (events come from the batch sampler)."""
    tr = object.__new__(Trajectory)
    object.__setattr__(tr, "events", events)
    object.__setattr__(tr, "tau", tau)
    return tr


def sample_trajectory_inversion(model: IntensityModel, theta: float,
                                rng_stream: Stream) -> Trajectory:
    """Exact sampler for constant baselines: invert the cumulative intensity.

    Cross-validates thinning; the two must agree in distribution.
    """
    if not model.psi.is_constant:
        raise ValueError("inversion sampler requires a constant baseline")
    model.check_theta(theta)
    attempt = 0
    while True:
        src = rng_stream if attempt == 0 else rng_stream.fork(_TIE_TAG + attempt)
        ev = _invert_marks(model, theta, src)
        if ev.size < 2 or np.all(np.diff(ev) > 0.0):
            return Trajectory(events=ev, tau=model.tau)
        attempt += 1


def _invert_marks(model, theta, stream):
    total = cumulative_intensity(model, theta, model.tau)
    count = stream.poisson(total)
    if count == 0:
        return np.empty(0)
    marks = np.sort(stream.random(count)) * total
    lam0 = model.psi.level
    r, d = model.r, model.delta
    m_ramp_start = lam0 * theta
    m_ramp_end = cumulative_intensity(model, theta, theta + d)

    t = np.empty_like(marks)
    lo = marks <= m_ramp_start
    t[lo] = marks[lo] / lam0
    hi = marks >= m_ramp_end
    t[hi] = (theta + d) + (marks[hi] - m_ramp_end) / (lam0 + r)
    mid = ~(lo | hi)
    if np.any(mid):
        # root of (r/2d) x^2 + lam0 x = m - lam0*theta, stable for either sign of r
        y = marks[mid] - m_ramp_start
        s = r / d
        t[mid] = theta + 2.0 * y / (lam0 + np.sqrt(lam0 * lam0 + 2.0 * s * y))
    return np.minimum(t, model.tau)


def sample_homogeneous_stream(rate: float, window_length: float,
                              rng_stream: Stream) -> np.ndarray:
    """Event times of a rate-`rate` Poisson stream on [0, window_length]."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    if window_length < 0:
        raise ValueError("window_length must be nonnegative")
    if window_length == 0:
        return np.empty(0)
    mean = rate * window_length
    block = max(16, int(mean + 10.0 * math.sqrt(mean) + 16))
    times = []
    last = 0.0
    while True:
        gaps = rng_stream.exponential(1.0 / rate, block)
        cand = last + np.cumsum(gaps)
        inside = cand <= window_length
        times.append(cand[inside])
        if not inside.all():
            break
        last = cand[-1]
    return np.concatenate(times)


def write_sample_csv(sample: SampleSet, path) -> None:
    """Dump a sample set: one row per event, 17 significant digits."""
    with open(path, "w") as fh:
        fh.write("trajectory_index,event_time\n")
        for j, traj in enumerate(sample.trajectories):
            for t in traj.events:
                fh.write("%d,%.17g\n" % (j, t))


def read_events_csv(path, tau: float, n: int | None = None) -> list:
    """Read a trajectory dump back into per-trajectory event arrays.

    `n` forces the trajectory count (trailing empty trajectories are legal).
    """
    idx = []
    times = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["trajectory_index", "event_time"]:
            raise ValueError(f"{path}: expected trajectory_index,event_time header")
        for line in fh:
            if not line.strip():
                continue
            a, b = line.split(",")
            idx.append(int(a))
            times.append(float(b))
    idx = np.asarray(idx, dtype=int)
    times = np.asarray(times, dtype=float)
    count = max(idx.max() + 1 if idx.size else 0, n or 0)
    return [Trajectory(events=np.sort(times[idx == j]), tau=tau)
            for j in range(count)]
