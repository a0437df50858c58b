"""QoE metric aggregation over departed sessions and per-slot ledgers."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

CSV_HEADER = (
    "strategy,rho,percent_user,avg_n_freeze,avg_t_freeze,"
    "freeze_ratio,rate_freeze,wasted_bw,peak_bw,sessions"
)


@dataclass(frozen=True)
class SessionRecord:
    """Per-session QoE facts, reported at departure."""

    arrival_slot: int
    freeze_count: int
    freeze_time: float   # slots spent frozen
    play_time: float     # slots of content actually played
    waste: float         # downloaded-but-never-viewed content (rate*slot units)


@dataclass(frozen=True)
class MetricsReport:
    percent_user: float
    avg_n_freeze: float
    avg_t_freeze: float
    freeze_ratio: float
    rate_freeze: float
    wasted_bw: float
    peak_bw: float
    sessions_completed: int
    total_session_seconds: float = 0.0
    empty: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def aggregate(
    sessions: Sequence[SessionRecord],
    ledgers,
    slot_length: float = 1.0,
) -> MetricsReport:
    """Fold departed sessions and slot ledgers into the five QoE metrics plus
    wasted and peak bandwidth.

    Session time is play plus freeze time; startup buffering is excluded.
    An empty session set yields an all-zero report flagged `empty`.
    """
    peak = max((l.bw_used for l in ledgers), default=0.0)
    n = len(sessions)
    if n == 0:
        return MetricsReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, float(peak), 0, 0.0, empty=True)
    freezes = sum(s.freeze_count for s in sessions)
    freeze_seconds = sum(s.freeze_time for s in sessions) * slot_length
    session_seconds = sum(s.play_time + s.freeze_time for s in sessions) * slot_length
    return MetricsReport(
        percent_user=sum(1 for s in sessions if s.freeze_count > 0) / n,
        avg_n_freeze=freezes / n,
        avg_t_freeze=freeze_seconds / n,
        freeze_ratio=freeze_seconds / session_seconds if session_seconds > 0 else 0.0,
        rate_freeze=freezes / (session_seconds / 60.0) if session_seconds > 0 else 0.0,
        wasted_bw=float(sum(s.waste for s in sessions)),
        peak_bw=float(peak),
        sessions_completed=n,
        total_session_seconds=session_seconds,
    )


def merge(a: MetricsReport, b: MetricsReport) -> MetricsReport:
    """Combine reports over disjoint session sets (parallel reduction)."""
    if a.empty:
        return b if not b.empty else MetricsReport(
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, max(a.peak_bw, b.peak_bw), 0, 0.0, empty=True
        )
    if b.empty:
        a_peak = max(a.peak_bw, b.peak_bw)
        return MetricsReport(
            a.percent_user, a.avg_n_freeze, a.avg_t_freeze, a.freeze_ratio,
            a.rate_freeze, a.wasted_bw, a_peak, a.sessions_completed,
            a.total_session_seconds,
        )
    n = a.sessions_completed + b.sessions_completed
    freezes = a.avg_n_freeze * a.sessions_completed + b.avg_n_freeze * b.sessions_completed
    freeze_seconds = a.avg_t_freeze * a.sessions_completed + b.avg_t_freeze * b.sessions_completed
    seconds = a.total_session_seconds + b.total_session_seconds
    return MetricsReport(
        percent_user=(a.percent_user * a.sessions_completed + b.percent_user * b.sessions_completed) / n,
        avg_n_freeze=freezes / n,
        avg_t_freeze=freeze_seconds / n,
        freeze_ratio=freeze_seconds / seconds if seconds > 0 else 0.0,
        rate_freeze=freezes / (seconds / 60.0) if seconds > 0 else 0.0,
        wasted_bw=a.wasted_bw + b.wasted_bw,
        peak_bw=max(a.peak_bw, b.peak_bw),
        sessions_completed=n,
        total_session_seconds=seconds,
    )


def csv_row(strategy: str, rho, report: MetricsReport) -> str:
    rho_str = "" if rho is None else f"{rho:g}"
    return ",".join(
        [
            strategy,
            rho_str,
            f"{report.percent_user:.6f}",
            f"{report.avg_n_freeze:.6f}",
            f"{report.avg_t_freeze:.6f}",
            f"{report.freeze_ratio:.6f}",
            f"{report.rate_freeze:.6f}",
            f"{report.wasted_bw:.3f}",
            f"{report.peak_bw:.3f}",
            str(report.sessions_completed),
        ]
    )


def reports_to_json(rows) -> str:
    """rows: iterable of (strategy, rho, MetricsReport)."""
    docs = []
    for strategy, rho, report in rows:
        doc = {"strategy": strategy, "rho": rho}
        doc.update(report.as_dict())
        docs.append(doc)
    return json.dumps(docs, indent=2, sort_keys=True)
