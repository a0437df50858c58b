"""Slot-loop simulation engine.

Each slot runs, in order: arrivals, rate allocation, download, playback and
freeze-state transitions, departures, accounting.  Sessions are kept in
struct-of-arrays form so a heavy-load run with ~1000 concurrent viewers stays
fast; a run is strictly sequential and deterministic given its seed (one RNG
substream feeds arrivals, another the departure-time draws).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .arrivals import ArrivalProcess
from .behavior import DepartureModel
from .metrics import MetricsReport, SessionRecord, aggregate
from .strategy import PoolState, make_allocator

STARTUP, PLAYING, FROZEN = 0, 1, 2

UNLIMITED = math.inf

LEDGER_HEADER = "slot,arrivals,active,bw_used,bw_wasted,departures"


@dataclass
class SimConfig:
    bitrate: float = 1.0             # Mb/s
    video_length: int = 300          # slots (= seconds)
    access_cap: float = 2.0          # Mb/s per user
    server_capacity: float = 1000.0  # Mb/s; math.inf for unlimited
    startup_threshold: float = 2.0   # buffer seconds before playback starts
    rebuffer_threshold: float = 2.0  # buffer seconds to exit a freeze
    freeze_trigger: float = 0.0      # buffer seconds at/below which a freeze begins
    playback_model: str = "freeze"   # "freeze" | "skip"
    seed: int = 12345
    duration: int = 3600             # slots to simulate
    warmup: int | None = None        # slots excluded from metrics; default 2 * video_length

    def validate(self) -> None:
        if self.bitrate <= 0 or self.access_cap <= 0:
            raise ValueError("bitrate and access_cap must be positive")
        if self.video_length < 1:
            raise ValueError("video_length must be positive")
        if self.server_capacity <= 0:
            raise ValueError("server_capacity must be positive (or unlimited)")
        if self.startup_threshold <= 0 or self.rebuffer_threshold <= 0:
            raise ValueError("startup and rebuffer thresholds must be positive")
        if self.freeze_trigger < 0:
            raise ValueError("freeze_trigger must be nonnegative")
        if self.rebuffer_threshold < self.freeze_trigger:
            raise ValueError("rebuffer_threshold must be >= freeze_trigger")
        if self.playback_model not in ("freeze", "skip"):
            raise ValueError("playback_model must be 'freeze' or 'skip'")
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")
        if self.warmup is not None and self.warmup < 0:
            raise ValueError("warmup must be nonnegative")

    @property
    def warmup_slots(self) -> int:
        return 2 * self.video_length if self.warmup is None else self.warmup

    @property
    def file_size(self) -> float:
        return self.video_length * self.bitrate


@dataclass
class SlotLedger:
    slot: int
    arrivals: int = 0
    active: int = 0
    bw_used: float = 0.0
    bw_wasted: float = 0.0
    departures: int = 0
    playing: int = 0       # sessions attempting playback this slot
    consumed: float = 0.0  # slots of content actually played (skip mode < playing)

    def row(self) -> str:
        return (
            f"{self.slot},{self.arrivals},{self.active},"
            f"{self.bw_used:.6f},{self.bw_wasted:.6f},{self.departures}"
        )


class World:
    """Mutable simulation state for one run."""

    def __init__(
        self,
        config: SimConfig,
        strategy: str,
        model: DepartureModel,
        departure_rng: np.random.Generator | None = None,
    ):
        config.validate()
        if model.slots != config.video_length:
            raise ValueError("departure model length must match video_length")
        self.config = config
        self.strategy = strategy
        self.model = model
        self._alloc = make_allocator(strategy, config.bitrate, model)
        if departure_rng is None:
            departure_rng = np.random.default_rng(
                np.random.SeedSequence(config.seed).spawn(2)[1]
            )
        self._dep_rng = departure_rng
        self.slot = 0
        self.ledgers: list[SlotLedger] = []
        self._skip_mode = config.playback_model == "skip"
        # Active-session arrays.
        self.arrival = np.zeros(0, dtype=np.int64)
        self.target = np.zeros(0, dtype=np.int64)
        self.playback = np.zeros(0, dtype=np.int64)
        self.buffer = np.zeros(0)
        self.downloaded = np.zeros(0)
        self.state = np.zeros(0, dtype=np.int8)
        self.freeze_count = np.zeros(0, dtype=np.int64)
        self.freeze_time = np.zeros(0, dtype=np.int64)
        self.skipped = np.zeros(0)
        self._records: list[SessionRecord] = []

    @property
    def active_count(self) -> int:
        return int(self.arrival.size)

    def _admit(self, n: int) -> None:
        draws = self._dep_rng.random(n)
        targets = self.model.sample_slots(draws).astype(np.int64)
        self.arrival = np.concatenate([self.arrival, np.full(n, self.slot, dtype=np.int64)])
        self.target = np.concatenate([self.target, targets])
        self.playback = np.concatenate([self.playback, np.zeros(n, dtype=np.int64)])
        self.buffer = np.concatenate([self.buffer, np.zeros(n)])
        self.downloaded = np.concatenate([self.downloaded, np.zeros(n)])
        self.state = np.concatenate([self.state, np.full(n, STARTUP, dtype=np.int8)])
        self.freeze_count = np.concatenate([self.freeze_count, np.zeros(n, dtype=np.int64)])
        self.freeze_time = np.concatenate([self.freeze_time, np.zeros(n, dtype=np.int64)])
        self.skipped = np.concatenate([self.skipped, np.zeros(n)])

    def _compress(self, keep: np.ndarray) -> None:
        self.arrival = self.arrival[keep]
        self.target = self.target[keep]
        self.playback = self.playback[keep]
        self.buffer = self.buffer[keep]
        self.downloaded = self.downloaded[keep]
        self.state = self.state[keep]
        self.freeze_count = self.freeze_count[keep]
        self.freeze_time = self.freeze_time[keep]
        self.skipped = self.skipped[keep]

    def step(self, n_arrivals: int = 0) -> SlotLedger:
        """Advance one slot: arrivals, allocation, download, playback, departures."""
        cfg = self.config
        if n_arrivals:
            self._admit(n_arrivals)
        n = self.active_count
        ledger = SlotLedger(slot=self.slot, arrivals=n_arrivals, active=n)
        if n:
            remaining = np.maximum(cfg.file_size - self.downloaded, 0.0)
            pool = PoolState(
                buffer=self.buffer,
                ratio=self.playback / cfg.video_length,
                access_cap=np.full(n, cfg.access_cap),
                remaining=remaining,
                in_startup=self.state == STARTUP,
                playing=self.state == PLAYING,
            )
            rates = self._alloc(pool, cfg.server_capacity)
            ledger.bw_used = float(rates.sum())
            self.buffer += rates / cfg.bitrate
            self.downloaded += rates

            newly_playing = (self.state == STARTUP) & (self.buffer >= cfg.startup_threshold)
            self.state[newly_playing] = PLAYING
            if self._skip_mode:
                playing = (self.state == PLAYING) & ~newly_playing
                take = np.minimum(self.buffer[playing], 1.0)
                self.buffer[playing] -= take
                self.playback[playing] += 1
                self.skipped[playing] += 1.0 - take
                ledger.playing = int(playing.sum())
                ledger.consumed = float(take.sum())
            else:
                exits = (self.state == FROZEN) & (self.buffer >= cfg.rebuffer_threshold)
                self.state[exits] = PLAYING
                # Sessions that just left startup or a freeze resume playback next slot.
                attempting = (self.state == PLAYING) & ~newly_playing & ~exits
                consume = attempting & (self.buffer - 1.0 > cfg.freeze_trigger)
                self.buffer[consume] -= 1.0
                self.playback[consume] += 1
                to_freeze = attempting & ~consume
                self.state[to_freeze] = FROZEN
                self.freeze_count[to_freeze] += 1
                frozen_now = self.state == FROZEN
                self.freeze_time[frozen_now] += 1
                ledger.playing = int(attempting.sum())
                ledger.consumed = float(consume.sum())

            departing = (self.playback >= self.target) | (
                self.downloaded >= cfg.file_size - 1e-9
            )
            n_dep = int(departing.sum())
            if n_dep:
                # Download-complete departures get credited up to their target:
                # the buffered tail up to the target would still be viewed.
                if self._skip_mode:
                    viewed = self.playback[departing] - self.skipped[departing]
                else:
                    viewed = np.where(
                        self.playback[departing] >= self.target[departing],
                        self.playback[departing],
                        self.target[departing],
                    )
                waste = np.maximum(self.downloaded[departing] - viewed * cfg.bitrate, 0.0)
                ledger.bw_wasted = float(waste.sum())
                ledger.departures = n_dep
                arrivals = self.arrival[departing]
                fc = self.freeze_count[departing]
                ft = self.freeze_time[departing]
                play = self.playback[departing]
                for i in range(n_dep):
                    self._records.append(
                        SessionRecord(
                            arrival_slot=int(arrivals[i]),
                            freeze_count=int(fc[i]),
                            freeze_time=float(ft[i]),
                            play_time=float(play[i]),
                            waste=float(waste[i]),
                        )
                    )
                self._compress(~departing)
        self.ledgers.append(ledger)
        self.slot += 1
        return ledger

    def departed_sessions(self) -> list[SessionRecord]:
        return list(self._records)


def step(world: World, n_arrivals: int = 0) -> World:
    """Functional-style wrapper over World.step."""
    world.step(n_arrivals)
    return world


@dataclass
class RunResult:
    strategy: str
    config: SimConfig
    report: MetricsReport
    ledgers: list[SlotLedger] = field(repr=False, default_factory=list)
    sessions: list[SessionRecord] = field(repr=False, default_factory=list)


def run(
    config: SimConfig,
    strategy: str,
    arrival_process: ArrivalProcess,
    model: DepartureModel,
) -> RunResult:
    """Execute `config.duration` slots from an empty system.

    Sessions report QoE at departure; sessions still alive at the end are
    excluded, as are sessions arriving (and slots falling) inside the warmup
    window.  Identical inputs and seed give identical outputs.
    """
    config.validate()
    seq = np.random.SeedSequence(config.seed)
    arr_seq, dep_seq = seq.spawn(2)
    counts = arrival_process.generate(config.duration, np.random.default_rng(arr_seq))
    world = World(config, strategy, model, departure_rng=np.random.default_rng(dep_seq))
    for c in counts:
        world.step(int(c))
    w = config.warmup_slots
    sessions = [s for s in world.departed_sessions() if s.arrival_slot >= w]
    measured = [l for l in world.ledgers if l.slot >= w]
    report = aggregate(sessions, measured, slot_length=1.0)
    return RunResult(
        strategy=strategy,
        config=config,
        report=report,
        ledgers=world.ledgers,
        sessions=sessions,
    )


def load_to_arrival_rate(
    rho: float,
    C: float,
    L: int,
    bitrate: float,
    mean_viewing_ratio: float = 1.0,
) -> float:
    """Arrival rate per slot producing offered load rho = lam*L*bitrate/C,
    corrected for the expected viewing ratio under early departure."""
    if rho <= 0 or C <= 0 or L <= 0 or bitrate <= 0 or mean_viewing_ratio <= 0:
        raise ValueError("all load inputs must be positive")
    return rho * C / (bitrate * L * mean_viewing_ratio)


def planning_viewing_ratio(
    mean_viewing_ratio: float,
    video_length: int,
    startup_threshold: float = 2.0,
    bitrate: float = 1.0,
    precision: float = 0.01,
) -> float:
    """Viewing-ratio estimate used when converting offered load to an
    arrival rate.

    A session downloads its viewed seconds plus the startup prefetch, so the
    per-session volume is mean_viewing_ratio * L * bitrate + startup bytes.
    Sizing the arrival rate with the raw mean viewing ratio therefore leaves
    the server slightly oversubscribed at any nominal load, and near rho = 1
    the active population random-walks instead of settling.  Rounding the
    per-session download ratio up to the planning precision keeps every
    nominal load < 1 strictly subcritical.
    """
    if video_length <= 0 or bitrate <= 0 or precision <= 0:
        raise ValueError("video_length, bitrate and precision must be positive")
    download_ratio = mean_viewing_ratio + startup_threshold / (video_length * bitrate)
    return math.ceil(download_ratio / precision) * precision


def export_ledgers(ledgers, path) -> None:
    """Write the per-slot table: slot,arrivals,active,bw_used,bw_wasted,departures."""
    with open(path, "w") as fh:
        fh.write(LEDGER_HEADER + "\n")
        for l in ledgers:
            fh.write(l.row() + "\n")
