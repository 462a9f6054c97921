import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from wignerframes.errors import GeometryError, KinematicsError
from wignerframes.relativity import (
    Boost,
    Event,
    boost_event,
    default_events,
    frame_ordering,
    interval,
    inversion_threshold,
    validate_geometry,
)

coords = st.floats(-100, 100, allow_nan=False)
betas = st.floats(-0.9, 0.9, allow_nan=False)


def with_e3(t3=2.0, x_a=10.0):
    ev = list(default_events())
    ev[3] = Event("E3", t3, x_a)
    return tuple(ev)


class TestBoost:
    def test_gamma(self):
        assert Boost(0.6).gamma == pytest.approx(1.25)
        assert Boost(0.0).gamma == 1.0

    @pytest.mark.parametrize("beta", [1.0, -1.0, 1.5, math.nan])
    def test_superluminal(self, beta):
        with pytest.raises(KinematicsError):
            Boost(beta)

    @settings(max_examples=300)
    @given(t=coords, x=coords, b=betas)
    def test_round_trip(self, t, x, b):
        e = Event("E", t, x)
        back = boost_event(boost_event(e, b), -b)
        scale = max(1.0, abs(t), abs(x))
        assert abs(back.t - t) <= 1e-12 * scale * 10
        assert abs(back.x - x) <= 1e-12 * scale * 10

    @settings(max_examples=300)
    @given(t1=coords, x1=coords, t2=coords, x2=coords, b=betas)
    def test_interval_invariant(self, t1, x1, t2, x2, b):
        e1, e2 = Event("a", t1, x1), Event("b", t2, x2)
        s = interval(e1, e2)
        s_b = interval(boost_event(e1, b), boost_event(e2, b))
        assert abs(s - s_b) <= 1e-12 * max(1.0, (abs(t1) + abs(t2) + abs(x1) + abs(x2)) ** 2) * 10


class TestOrdering:
    def test_rest_frame(self):
        o = frame_ordering(default_events(), 0.0)
        assert o.ids == ("E0", "E1", "E2", "E3")
        assert not o.simultaneous

    def test_inverted_frame(self):
        # At beta = 0.2 Alice's event lands on t' = 0, tied with the preparation.
        o = frame_ordering(default_events(), 0.2)
        assert o.ids == ("E0", "E3", "E1", "E2")
        assert o.before("E3", "E2") and o.before("E1", "E2")
        assert o.ties == (("E0", "E3"),)

    def test_just_below_threshold(self):
        assert frame_ordering(default_events(), 0.1 - 1e-6).ids == ("E0", "E1", "E2", "E3")

    def test_at_threshold_is_tied(self):
        o = frame_ordering(default_events(), 0.1)
        assert ("E2", "E3") in o.ties

    @settings(max_examples=200)
    @given(b=st.floats(0.0, 0.9, allow_nan=False))
    def test_monotone_threshold(self, b):
        assume(abs(b - 0.1) > 1e-9)
        o = frame_ordering(default_events(), b)
        assert o.before("E3", "E2") == (b > 0.1)

    @settings(max_examples=100)
    @given(b=betas)
    def test_lab_events_keep_order(self, b):
        o = frame_ordering(default_events(), b)
        assert o.before("E0", "E1") and o.before("E1", "E2")


class TestThreshold:
    def test_default(self):
        ev = default_events()
        assert inversion_threshold(ev[2], ev[3]) == 0.1

    def test_simultaneous(self):
        assert inversion_threshold(Event("E2", 1.0, 0.0), Event("E3", 1.0, 5.0)) == 0.0

    def test_far_alice(self):
        vals = [inversion_threshold(Event("E2", 1, 0), Event("E3", 2, x)) for x in (10, 1e3, 1e6)]
        assert vals[0] > vals[1] > vals[2] > 0 and vals[2] < 1e-5

    @pytest.mark.parametrize("e3", [Event("E3", 2.0, 0.5), Event("E3", 2.0, 1.0)])
    def test_timelike_or_lightlike(self, e3):
        with pytest.raises(GeometryError):
            inversion_threshold(Event("E2", 1.0, 0.0), e3)

    @settings(max_examples=100, deadline=None)
    @given(dt=st.floats(0.0, 5.0), dx=st.floats(0.5, 50.0))
    def test_bisection_agreement(self, dt, dx):
        assume(dt < 0.85 * dx)
        e2, e3 = Event("E2", 1.0, 0.0), Event("E3", 1.0 + dt, dx)
        beta_star = inversion_threshold(e2, e3)
        evs = (Event("E0", 0.0, 0.0), Event("E1", 0.5, 0.0), e2, e3)
        lo, hi = -0.0, 0.9
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if frame_ordering(evs, mid).before("E3", "E2"):
                hi = mid
            else:
                lo = mid
        assert abs(0.5 * (lo + hi) - beta_star) <= 1e-10


class TestValidation:
    def test_default_passes(self):
        report = validate_geometry(default_events())
        assert report.ok and report.beta_star == 0.1
        assert [c.name for c in report.checks] == [
            "lab_colocated",
            "alice_position",
            "rest_frame_ordering",
            "emission_alice_spacelike",
        ]

    def test_not_spacelike(self):
        report = validate_geometry(with_e3(t3=2.0, x_a=0.5))
        assert [c.name for c in report.failures()] == ["emission_alice_spacelike"]
        assert report.beta_star is None

    def test_permuted_times(self):
        ev = list(default_events())
        ev[0], ev[1] = Event("E0", 0.6, 0.0), Event("E1", 0.2, 0.0)
        assert [c.name for c in validate_geometry(ev).failures()] == ["rest_frame_ordering"]

    def test_wrong_ids(self):
        report = validate_geometry(default_events()[:3])
        assert not report.ok and report.failures()[0].name == "event_ids"

    def test_as_dict(self):
        d = validate_geometry(default_events()).as_dict()
        assert d["ok"] is True and len(d["checks"]) == 4
