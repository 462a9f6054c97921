"""Events, boosts, and frame-dependent time ordering (units with c = 1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, KinematicsError

EVENT_IDS = ("E0", "E1", "E2", "E3")
TIE_TOL = 1e-12


@dataclass(frozen=True)
class Event:
    id: str
    t: float
    x: float


@dataclass(frozen=True)
class Boost:
    beta: float

    def __post_init__(self):
        if not abs(self.beta) < 1:
            raise KinematicsError(f"|beta| must be < 1, got {self.beta!r}")

    @property
    def gamma(self) -> float:
        return 1.0 / np.sqrt(1.0 - self.beta**2)


def default_events(t0=0.0, t1=0.5, t2=1.0, t3=2.0, x_a=10.0) -> tuple[Event, ...]:
    """Preparation, friend measurement and emission at the lab (x = 0); Alice at x_a."""
    return (Event("E0", t0, 0.0), Event("E1", t1, 0.0), Event("E2", t2, 0.0), Event("E3", t3, x_a))


def boost_event(e: Event, b) -> Event:
    """t' = gamma (t - beta x), x' = gamma (x - beta t)."""
    if not isinstance(b, Boost):
        b = Boost(b)
    g = b.gamma
    return Event(e.id, g * (e.t - b.beta * e.x), g * (e.x - b.beta * e.t))


def interval(e1: Event, e2: Event) -> float:
    """dt^2 - dx^2; negative for spacelike separation.

    Evaluated as (dt - dx)(dt + dx), which keeps relative accuracy near the
    light cone.
    """
    dt, dx = e2.t - e1.t, e2.x - e1.x
    return (dt - dx) * (dt + dx)


@dataclass(frozen=True)
class FrameOrdering:
    ids: tuple[str, ...]
    times: dict
    simultaneous: bool
    ties: tuple[tuple[str, str], ...] = ()

    def before(self, a: str, b: str) -> bool:
        return self.ids.index(a) < self.ids.index(b)


def _tied(ta: float, tb: float) -> bool:
    return abs(ta - tb) <= TIE_TOL * max(1.0, abs(ta), abs(tb))


def frame_ordering(events, b) -> FrameOrdering:
    """Event ids sorted by boosted time; ties fall back to id order and are flagged."""
    boosted = [boost_event(e, b) for e in events]
    times = {e.id: e.t for e in boosted}
    ids = tuple(e.id for e in sorted(boosted, key=lambda e: (e.t, e.id)))
    ties = tuple(
        (a.id, c.id)
        for i, a in enumerate(boosted)
        for c in boosted[i + 1 :]
        if _tied(a.t, c.t)
    )
    return FrameOrdering(ids, times, bool(ties), ties)


def inversion_threshold(e2: Event, e3: Event) -> float:
    """Smallest boost velocity beyond which e3 precedes e2: (t3 - t2) / (x3 - x2)."""
    if interval(e2, e3) >= 0:
        raise GeometryError(f"{e2.id} and {e3.id} are not spacelike separated; their order is frame-invariant")
    if not (e3.x > e2.x and e3.t >= e2.t):
        raise GeometryError(f"need x({e3.id}) > x({e2.id}) and t({e3.id}) >= t({e2.id})")
    return (e3.t - e2.t) / (e3.x - e2.x)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class GeometryReport:
    checks: tuple[Check, ...]
    beta_star: float | None

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "beta_star": self.beta_star,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def validate_geometry(events) -> GeometryReport:
    """Check the lab/Alice spacetime layout; failures are reported, not raised."""
    events = tuple(events)
    ids = tuple(sorted(e.id for e in events))
    if ids != EVENT_IDS:
        return GeometryReport((Check("event_ids", False, f"expected {EVENT_IDS}, got {ids}"),), None)
    ev = {e.id: e for e in events}
    lab = [ev[i].x for i in ("E0", "E1", "E2")]
    checks = [
        Check("lab_colocated", all(x == 0.0 for x in lab), f"x(E0, E1, E2) = {lab}"),
        Check("alice_position", ev["E3"].x > 0, f"x_A = {ev['E3'].x!r}"),
        Check(
            "rest_frame_ordering",
            ev["E0"].t < ev["E1"].t < ev["E2"].t < ev["E3"].t,
            "t = " + ", ".join(f"{i}:{ev[i].t!r}" for i in EVENT_IDS),
        ),
        Check(
            "emission_alice_spacelike",
            interval(ev["E2"], ev["E3"]) < 0,
            f"interval(E2, E3) = {interval(ev['E2'], ev['E3'])!r}",
        ),
    ]
    try:
        beta_star = inversion_threshold(ev["E2"], ev["E3"])
    except GeometryError:
        beta_star = None
    return GeometryReport(tuple(checks), beta_star)
