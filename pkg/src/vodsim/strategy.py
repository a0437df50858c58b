"""Per-slot bandwidth allocation strategies.

Six strategies share one primitive: max-min fair water-filling subject to
per-user demand caps.  SC/SC+ cap each user at (1 + delta) times the bitrate,
BE at the access link, EB water-fills projected next-slot buffers, EW
water-fills hazard-weighted buffers, and BB pins browsing-phase users to the
bitrate and serves the rest best-effort (falling back to plain BE when the
reservation would starve the viewing users).

Every allocator is a pure function of its inputs.  The array-level *_rates
functions are what the simulation engine calls; the allocate_* wrappers take
UserView lists and return an Allocation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .behavior import DepartureRates, PhaseBoundary

FEAS_TOL = 1e-9

STRATEGY_NAMES = ("sc", "sc+", "be", "eb", "ew", "bb")


@dataclass
class UserView:
    """One session's allocation-relevant state for the current slot."""

    session_id: object
    viewing_ratio: float
    buffer_seconds: float
    access_cap: float
    remaining_demand: float
    in_startup: bool = False
    playing: bool = True  # False for frozen sessions (no playback this slot)

    def __post_init__(self):
        if self.buffer_seconds < 0:
            raise ValueError("buffer_seconds must be nonnegative")
        if not 0.0 <= self.viewing_ratio <= 1.0:
            raise ValueError("viewing_ratio must lie in [0, 1]")
        if self.access_cap <= 0:
            raise ValueError("access_cap must be positive")


@dataclass
class Allocation:
    """Per-session download rates for one slot."""

    rates: dict = field(default_factory=dict)

    def total(self) -> float:
        return float(sum(self.rates.values()))


@dataclass(frozen=True)
class DepartureRateFn:
    """Piecewise-constant hazard lookup backed by DepartureRates."""

    rates: DepartureRates

    def __call__(self, viewing_ratio: float) -> float:
        p = self.rates.p
        idx = min(int(viewing_ratio * p.size), p.size - 1)
        return float(p[idx])


class PoolState(NamedTuple):
    """Array view of all active sessions, as the engine sees them."""

    buffer: np.ndarray         # seconds of unplayed content
    ratio: np.ndarray          # viewing ratio in [0, 1]
    access_cap: np.ndarray     # per-user rate cap
    remaining: np.ndarray      # max useful download this slot (rate units)
    in_startup: np.ndarray     # bool
    playing: np.ndarray        # bool; False for startup and frozen sessions


def _level_fill(floors, weights, caps, budget):
    """Raise weighted levels w_i*(floor_i + x_i) to a common value.

    Finds x (0 <= x_i <= cap_i, sum x_i <= budget) that lexicographically
    maximizes the level vector; users whose cap binds below the common level
    receive their cap.  Returns (x, level); level is +inf when every cap binds
    with budget to spare.
    """
    floors = np.asarray(floors, dtype=float)
    weights = np.asarray(weights, dtype=float)
    caps = np.asarray(caps, dtype=float)
    n = floors.size
    if n == 0:
        return np.zeros(0), math.inf
    caps = np.maximum(caps, 0.0)
    total_caps = float(caps.sum())
    if budget >= total_caps:
        return caps.copy(), math.inf
    if budget <= 0.0:
        lvl = float((weights * floors).min()) if n else math.inf
        return np.zeros(n), lvl

    starts = weights * floors
    ends = weights * (floors + caps)
    points = np.concatenate([starts, ends])
    slopes = np.concatenate([1.0 / weights, -1.0 / weights])
    order = np.argsort(points, kind="stable")
    pts = points[order]
    slope = np.cumsum(slopes[order])
    # Cumulative capacity spent to raise the level up to each breakpoint.
    spent = np.concatenate(([0.0], np.cumsum(slope[:-1] * np.diff(pts))))
    k = int(np.searchsorted(spent, budget, side="right")) - 1
    if k >= n * 2 - 1:
        return caps.copy(), math.inf
    if slope[k] > 0:
        level = pts[k] + (budget - spent[k]) / slope[k]
    else:
        level = pts[k]
    x = np.clip(level / weights - floors, 0.0, caps)
    return x, float(level)


def waterfill(demands, capacity):
    """Max-min fair split of capacity under per-user demand caps."""
    x, _ = _level_fill(np.zeros(len(demands)), np.ones(len(demands)), demands, capacity)
    return x


def sc_rates(pool: PoolState, C: float, bitrate: float, delta: float = 0.0) -> np.ndarray:
    """Simple rate control: demand capped at bitrate*(1+delta); startup users
    are served best-effort."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    d = np.minimum(pool.access_cap, pool.remaining)
    d = np.where(pool.in_startup, d, np.minimum(d, bitrate * (1.0 + delta)))
    return waterfill(d, C)


def be_rates(pool: PoolState, C: float) -> np.ndarray:
    """Best-effort progressive download: max-min fair over full demands."""
    return waterfill(np.minimum(pool.access_cap, pool.remaining), C)


def _buffer_fill(pool: PoolState, C: float, bitrate: float, weights: np.ndarray) -> np.ndarray:
    """Weighted water-fill of projected next-slot buffers.

    Zero-weight users cannot raise the waste level, so they are served after
    all positive-weight users reach the common level.
    """
    floors = pool.buffer - pool.playing.astype(float)
    caps_sec = np.minimum(pool.access_cap, pool.remaining) / bitrate
    budget_sec = C / bitrate if not math.isinf(C) else math.inf
    x = np.zeros(floors.size)
    pos = weights > 0
    spent = 0.0
    if pos.any():
        w = weights[pos]
        w = w / w.max()  # scale-invariant; constant weights become exactly 1.0
        x_pos, _ = _level_fill(floors[pos], w, caps_sec[pos], budget_sec)
        x[pos] = x_pos
        spent = float(x_pos.sum())
    rest = ~pos
    if rest.any():
        leftover = budget_sec - spent if not math.isinf(budget_sec) else math.inf
        if leftover > 0:
            x_rest, _ = _level_fill(floors[rest], np.ones(int(rest.sum())), caps_sec[rest], leftover)
            x[rest] = x_rest
    return x * bitrate


def eb_rates(pool: PoolState, C: float, bitrate: float) -> np.ndarray:
    """Equal-buffer streaming: water-fill projected next-slot buffers."""
    return _buffer_fill(pool, C, bitrate, np.ones(pool.buffer.size))


def ew_rates(pool: PoolState, C: float, bitrate: float, hazard: np.ndarray) -> np.ndarray:
    """Equal waste-rate streaming: equalize hazard * projected buffer."""
    hazard = np.asarray(hazard, dtype=float)
    if np.any(hazard < 0) or np.any(hazard > 1):
        raise ValueError("hazard values must lie in [0, 1]")
    return _buffer_fill(pool, C, bitrate, hazard)


def bb_rates(pool: PoolState, C: float, bitrate: float, boundary: PhaseBoundary) -> np.ndarray:
    """Behavior-based streaming: pin browsing users to the bitrate, serve the
    rest best-effort; fall back to plain BE if browsing would out-pace viewing."""
    browsing = (~pool.in_startup) & (pool.ratio < boundary.boundary_ratio)
    if not browsing.any():
        return be_rates(pool, C)
    d_all = np.minimum(pool.access_cap, pool.remaining)
    d_browse = np.minimum(d_all[browsing], bitrate)
    reserved = float(d_browse.sum())
    if reserved > C:
        d_browse = d_browse * (C / reserved)  # degenerate overload: equal scale-down
    rates = np.zeros(pool.buffer.size)
    rates[browsing] = d_browse
    others = ~browsing
    if not others.any():
        return rates
    residual = max(C - float(d_browse.sum()), 0.0) if not math.isinf(C) else math.inf
    x, level = _level_fill(
        np.zeros(int(others.sum())), np.ones(int(others.sum())), d_all[others], residual
    )
    if level < float(d_browse.max()):
        return be_rates(pool, C)
    rates[others] = x
    return rates


def _pool_from_users(users: Sequence[UserView]) -> PoolState:
    return PoolState(
        buffer=np.array([u.buffer_seconds for u in users], dtype=float),
        ratio=np.array([u.viewing_ratio for u in users], dtype=float),
        access_cap=np.array([u.access_cap for u in users], dtype=float),
        remaining=np.array([u.remaining_demand for u in users], dtype=float),
        in_startup=np.array([u.in_startup for u in users], dtype=bool),
        playing=np.array([u.playing and not u.in_startup for u in users], dtype=bool),
    )


def _to_allocation(users: Sequence[UserView], rates: np.ndarray) -> Allocation:
    return Allocation({u.session_id: float(r) for u, r in zip(users, rates)})


def allocate_sc(users, C, bitrate, delta: float = 0.0) -> Allocation:
    if not users:
        return Allocation()
    return _to_allocation(users, sc_rates(_pool_from_users(users), C, bitrate, delta))


def allocate_be(users, C) -> Allocation:
    if not users:
        return Allocation()
    return _to_allocation(users, be_rates(_pool_from_users(users), C))


def allocate_eb(users, C, bitrate) -> Allocation:
    if not users:
        return Allocation()
    return _to_allocation(users, eb_rates(_pool_from_users(users), C, bitrate))


def allocate_ew(users, C, bitrate, f: Callable[[float], float]) -> Allocation:
    if not users:
        return Allocation()
    hazard = np.array([f(u.viewing_ratio) for u in users], dtype=float)
    return _to_allocation(users, ew_rates(_pool_from_users(users), C, bitrate, hazard))


def allocate_bb(users, C, bitrate, boundary: PhaseBoundary) -> Allocation:
    if not users:
        return Allocation()
    return _to_allocation(users, bb_rates(_pool_from_users(users), C, bitrate, boundary))


def make_allocator(name: str, bitrate: float, model=None):
    """Build the array-level allocator the engine drives each slot.

    `model` (a DepartureModel) is required for ew (hazard lookup) and bb
    (phase boundary).
    """
    name = name.lower()
    if name == "sc":
        return lambda pool, C: sc_rates(pool, C, bitrate, 0.0)
    if name == "sc+":
        return lambda pool, C: sc_rates(pool, C, bitrate, 0.05)
    if name == "be":
        return lambda pool, C: be_rates(pool, C)
    if name == "eb":
        return lambda pool, C: eb_rates(pool, C, bitrate)
    if name == "ew":
        if model is None:
            raise ValueError("ew needs a departure model")
        return lambda pool, C: ew_rates(pool, C, bitrate, model.hazard_at(pool.ratio))
    if name == "bb":
        if model is None:
            raise ValueError("bb needs a departure model")
        boundary = model.boundary
        return lambda pool, C: bb_rates(pool, C, bitrate, boundary)
    raise ValueError(f"unknown strategy {name!r}; choose from {STRATEGY_NAMES}")
