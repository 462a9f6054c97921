"""The protocol state machine.

Events are bound to actions and executed in the order fixed by the observing
frame:

* E0 prepares the entangled friend/Alice pair,
* E1 is the friend's measurement and reset (plus a global collapse under
  ``OBJECTIVE_COLLAPSE``),
* E2 emits two qubits that W weakly measures and post-selects (``WEAK``) or
  measures projectively (``PROJECTIVE``),
* E3 is Alice's projective measurement.

All three entry points (:func:`run_exact`, :func:`run_trial`,
:func:`run_monte_carlo`) walk the same branch tree. The exact run sums over
every branch; trials pick one child per stochastic step by inverting the
cumulative Born probabilities with the draw reserved for that step.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from . import qmath, registers, weakmeas
from .errors import (
    ConfigurationError,
    InvariantViolation,
    KinematicsError,
    RecordUndefinedError,
    UndeclarableRecordError,
)
from .registers import DiscreteState
from .relativity import Boost, Event, default_events, frame_ordering, validate_geometry
from .streams import (
    N_SLOTS,
    SLOT_ALICE,
    SLOT_COLLAPSE,
    SLOT_W1,
    SLOT_W2,
    SLOT_X1,
    SLOT_X2,
    TrialStream,
    trial_uniforms,
)
from .weakmeas import HybridState

PROB_FLOOR = 1e-14
PURITY_TOL = 1e-9
CHUNK = 1 << 16
WORKERS_ENV = "WIGNERFRAMES_WORKERS"

UNDECLARED = "undeclared"
RECORD_LABELS = (UNDECLARED, "z+", "z-", "x+", "x-")
RECORD_STATES = {
    "z+": qmath.KET_PLUS,
    "z-": qmath.KET_MINUS,
    "x+": qmath.KET_PLUS_X,
    "x-": qmath.KET_MINUS_X,
}
S0_STATES = {"+": qmath.KET_PLUS, "-": qmath.KET_MINUS, "+x": qmath.KET_PLUS_X, "-x": qmath.KET_MINUS_X}
POSTSELECTION_OUTCOMES = ("++", "+-", "-+", "--")
STOCHASTIC = frozenset({"collapse", "postselect", "measure_q1", "measure_q2", "alice"})


class Mode(str, Enum):
    UNITARY_LAB = "unitary_lab"
    OBJECTIVE_COLLAPSE = "objective_collapse"


class Scheme(str, Enum):
    WEAK = "weak"
    PROJECTIVE = "projective"


@dataclass(frozen=True)
class ProtocolConfig:
    alpha: complex = 1 / math.sqrt(2)
    beta: complex = 1 / math.sqrt(2)
    s0: str = "+"
    theta1: float = math.pi / 3
    theta2: float = math.pi / 3
    g: float = 0.1
    w: float = 1.0
    boost: float = 0.0
    events: tuple = field(default_factory=default_events)
    mode: Mode = Mode.UNITARY_LAB
    scheme: Scheme = Scheme.WEAK
    alice_angle: float = math.pi / 2
    trials: int = 100_000
    seed: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", Mode(self.mode))
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        object.__setattr__(self, "events", tuple(self.events))
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1) > 1e-12:
            raise ConfigurationError("alpha, beta: |alpha|^2 + |beta|^2 must equal 1")
        if self.s0 not in S0_STATES:
            raise ConfigurationError(f"s0: must be one of {sorted(S0_STATES)}, got {self.s0!r}")
        for name in ("theta1", "theta2"):
            th = getattr(self, name)
            if not 0.0 <= th <= math.pi:
                raise ConfigurationError(f"{name}: post-selection angle must lie in [0, pi], got {th!r}")
        if not math.isfinite(self.g):
            raise ConfigurationError("g: coupling must be finite")
        if not (self.w > 0 and math.isfinite(self.w)):
            raise ConfigurationError(f"w: pointer width must be positive and finite, got {self.w!r}")
        if not math.isfinite(self.alice_angle):
            raise ConfigurationError(f"alice_angle: must be finite, got {self.alice_angle!r}")
        if not all(math.isfinite(e.t) and math.isfinite(e.x) for e in self.events):
            raise ConfigurationError("events: coordinates must be finite")
        if not abs(self.boost) < 1:
            raise ConfigurationError(f"beta: frame velocity must satisfy |beta| < 1, got {self.boost!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigurationError(f"trials: must be a positive integer, got {self.trials!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed: must be an integer in [0, 2^64), got {self.seed!r}")

    def with_(self, **changes) -> "ProtocolConfig":
        return replace(self, **changes)

    @property
    def beta_star(self):
        return validate_geometry(self.events).beta_star


@dataclass(frozen=True)
class Schedule:
    ordering: object  # relativity.FrameOrdering, kinematic order in the observing frame
    executed: tuple[str, ...]
    steps: tuple[tuple[str, str], ...]


def build_schedule(config: ProtocolConfig) -> Schedule:
    """Bind actions to events and order them for ``config.boost``.

    Preparation is the initial condition and always runs first. Alice's
    measurement acts on a different subsystem than the friend, so its order
    relative to E1 never changes a result; only its order relative to E2 does,
    and a tie there is rejected.
    """
    report = validate_geometry(config.events)
    if not report.ok:
        raise ConfigurationError(
            "invalid event geometry: " + "; ".join(f"{c.name} ({c.detail})" for c in report.failures())
        )
    try:
        ordering = frame_ordering(config.events, Boost(config.boost))
    except KinematicsError as exc:
        raise ConfigurationError(str(exc)) from None
    if ("E2", "E3") in ordering.ties or ("E3", "E2") in ordering.ties:
        raise ConfigurationError(
            f"simultaneity: E2 and E3 coincide in the frame with beta={config.boost!r} "
            f"(beta* = {report.beta_star!r}); their order is undefined"
        )
    executed = ("E0",) + tuple(i for i in ordering.ids if i != "E0")
    if executed.index("E1") > executed.index("E2"):
        raise InvariantViolation("E1 after E2 in a frame; colocated events cannot reorder")
    actions = {
        "E0": ["prepare"],
        "E1": ["friend"] + (["collapse"] if config.mode is Mode.OBJECTIVE_COLLAPSE else []),
        "E2": ["emit"]
        + (
            ["couple", "postselect", "read"]
            if config.scheme is Scheme.WEAK
            else ["measure_q1", "measure_q2"] + (["declare"] if config.mode is Mode.UNITARY_LAB else [])
        ),
        "E3": ["alice"],
    }
    steps = tuple((e, a) for e in executed for a in actions[e])
    return Schedule(ordering, executed, steps)


def classify_record(vector) -> str | None:
    """Match a record vector (a, b) on span{eps+, eps-} to z+/z-/x+/x- up to phase."""
    for label, ref in RECORD_STATES.items():
        if abs(np.vdot(ref, vector)) ** 2 > 1 - PURITY_TOL:
            return label
    return None


def declare_record(state: DiscreteState) -> tuple[str, int]:
    """The friend's public declaration of her record as (basis, value)."""
    t = np.moveaxis(state.tensor, state.layout.position("E"), 0)
    if np.max(np.abs(t[registers.READY])) > registers.SUPPORT_TOL:
        raise UndeclarableRecordError("environment holds no record yet (eps0 component present)")
    vec = registers.record_vector(state)
    if vec is None:
        raise RecordUndefinedError("environment is entangled with the outside; no definite record")
    label = classify_record(vec)
    if label is None:
        raise UndeclarableRecordError(f"environment record {vec} is neither a z- nor an x-record")
    return label[0], +1 if label[1] == "+" else -1


def _emission_label(vec) -> str:
    if vec is None:
        return "entangled"
    label = classify_record(vec)
    if label is not None:
        return {"z+": "+", "z-": "-", "x+": "+x", "x-": "-x"}[label]
    return f"({vec[0]:.6g})|+> + ({vec[1]:.6g})|->"


def friend_send_qubits(state: DiscreteState) -> DiscreteState:
    """Emit Q1, Q2 according to the friend's record.

    With a definite record a|eps+> + b|eps-> both qubits are prepared in
    a|+> + b|->; while the environment is entangled with the outside the
    emission is the controlled copy eps+- -> eps+- |+-,+->.
    """
    vec = registers.record_vector(state)
    if vec is None:
        return registers.controlled_emit(state)
    return registers.append_qubits(state, vec, vec)


@dataclass(frozen=True)
class Branch:
    weight: float = 1.0
    state: object = None
    record: str = UNDECLARED
    ancilla: bool = False
    emitted: str | None = None
    postselection: str | None = None
    q1: int | None = None
    q2: int | None = None
    alice: int | None = None
    moment: float = 0.0
    read: bool = False

    def evolve(self, **changes) -> "Branch":
        """``dataclasses.replace`` without re-running field processing (hot path)."""
        new = object.__new__(Branch)
        new.__dict__.update(self.__dict__)
        new.__dict__.update(changes)
        return new


def _project(state, register, vector):
    if isinstance(state, HybridState):
        return weakmeas.project_register(state, register, vector)
    return registers.project(state, register, vector)


def _outcomes(action: str, config: ProtocolConfig):
    """Projections and record updates for each outcome of a stochastic action."""
    sign = {0: +1, 1: -1}
    if action == "collapse":
        e = np.eye(3, dtype=complex)
        return [
            ([("E", e[registers.REC_PLUS])], {"record": "z+"}),
            ([("E", e[registers.REC_MINUS])], {"record": "z-"}),
        ], SLOT_COLLAPSE
    if action == "postselect":
        out = []
        for label in POSTSELECTION_OUTCOMES:
            s1, s2 = (+1 if c == "+" else -1 for c in label)
            out.append(
                (
                    [("Q1", qmath.theta_ket(config.theta1, s1)), ("Q2", qmath.theta_ket(config.theta2, s2))],
                    {"postselection": label},
                )
            )
        return out, SLOT_W1
    if action == "measure_q1":
        return [([("Q1", v)], {"q1": sign[k]}) for k, v in enumerate((qmath.KET_PLUS, qmath.KET_MINUS))], SLOT_W1
    if action == "measure_q2":
        return [([("Q2", v)], {"q2": sign[k]}) for k, v in enumerate((qmath.KET_PLUS_X, qmath.KET_MINUS_X))], SLOT_W2
    if action == "alice":
        basis = qmath.theta_basis(config.alice_angle)
        return [([("A", v)], {"alice": sign[k]}) for k, v in enumerate(basis)], SLOT_ALICE
    return None, None


def _norm2(state) -> float:
    return state.norm_squared()


def _deterministic(branch: Branch, action: str, config: ProtocolConfig) -> Branch:
    state = branch.state
    if action == "prepare":
        return branch.evolve(state=registers.prepare_initial(config.alpha, config.beta))
    if action == "friend":
        return branch.evolve(state=registers.friend_measure_and_reset(state, S0_STATES[config.s0]), ancilla=True)
    if action == "emit":
        vec = registers.record_vector(state)
        return branch.evolve(state=friend_send_qubits(state), emitted=_emission_label(vec))
    if action == "couple":
        h = weakmeas.attach_pointers(state, config.w)
        h = weakmeas.couple(h, "Q1", 1, config.g)
        h = weakmeas.couple(h, "Q2", 2, config.g)
        return branch.evolve(state=h)
    if action == "declare":
        basis, value = declare_record(state)
        return branch.evolve(record=f"{basis}{'+' if value > 0 else '-'}")
    if action == "read":
        return branch.evolve(read=True)
    raise InvariantViolation(f"unknown action {action!r}")


def _children(branch: Branch, action: str, config: ProtocolConfig, leaf: bool = False):
    """Conditional probabilities and normalized children of one stochastic step.

    With ``leaf=True`` (nothing runs afterwards) child states are dropped and
    the last outcome's probability is taken as the complement of the others.
    """
    outcomes, _ = _outcomes(action, config)
    total = _norm2(branch.state)
    kids = []
    partial: dict = {}
    seen = 0.0
    for n, (projections, update) in enumerate(outcomes):
        if leaf and n == len(outcomes) - 1 and update.get("postselection") != "++":
            p = max(1.0 - seen, 0.0)
            if p > PROB_FLOOR:
                if action == "postselect":
                    update = {**update, "moment": 0.0}
                kids.append((p, branch.evolve(weight=branch.weight * p, state=None, **update)))
            break
        state = branch.state
        for depth, (register, vector) in enumerate(projections):
            key = (depth, register, vector.tobytes())
            if depth == 0 and key in partial:
                state = partial[key]
                continue
            state = _project(state, register, vector)
            if depth == 0:
                partial[key] = state
        p = _norm2(state) / total
        seen += p
        if p <= PROB_FLOOR:
            continue
        moment = None
        if action == "postselect":
            success = update["postselection"] == "++"
            moment = weakmeas.joint_position_moment(state) / (p * total) if success else 0.0
        if leaf:
            state = None
        elif isinstance(state, HybridState):
            state = state.scaled(1 / math.sqrt(p * total))
        else:
            state = state.normalize()
        child = branch.evolve(weight=branch.weight * p, state=state, **update)
        if moment is not None:
            child = child.evolve(moment=moment)
        kids.append((p, child))
    return kids


def _expand_step(branches, step, config: ProtocolConfig, leaf: bool = False):
    action = step[1]
    out = []
    for b in branches:
        if action in STOCHASTIC:
            out.extend(child for _, child in _children(b, action, config, leaf=leaf))
        else:
            out.append(_deterministic(b, action, config))
    return out


# Steps that touch nothing but the prepared pair and the friend's lab; their
# branches depend only on the fields in the cache key below.
_PREFIX_ACTIONS = frozenset({"prepare", "friend", "collapse", "emit", "alice"})


@lru_cache(maxsize=64)
def _prefix_branches(alpha, beta, s0, alice_angle, steps) -> tuple:
    config = ProtocolConfig(alpha=alpha, beta=beta, s0=s0, alice_angle=alice_angle)
    branches = [Branch()]
    for step in steps:
        branches = _expand_step(branches, step, config)
    return tuple(branches)


def _leaves(schedule: Schedule, config: ProtocolConfig) -> list:
    steps = schedule.steps
    n = 0
    while n < len(steps) and steps[n][1] in _PREFIX_ACTIONS and (n == 0 or steps[n - 1][1] != "emit"):
        n += 1
    branches = list(_prefix_branches(config.alpha, config.beta, config.s0, config.alice_angle, steps[:n]))
    for i in range(n, len(steps)):
        branches = _expand_step(branches, steps[i], config, leaf=i == len(steps) - 1)
    return branches


@dataclass(frozen=True)
class ExactResults:
    joint_moment: float | None
    success_prob: float | None
    normalized_moment: float | None
    friend_records: dict
    alice_plus: float
    emitted: dict
    w_outcomes: dict
    q1_matches_record: float | None
    q2_matches_record: float | None
    frame_ordering: tuple
    executed_order: tuple
    convention: str = "unnormalized"

    @property
    def emitted_label(self) -> str:
        labels = [k for k, v in self.emitted.items() if v > 0]
        return "entangled" if labels == ["entangled"] else "product"

    def numeric_fields(self) -> dict:
        """Flat name -> value map used for frame comparisons."""
        out = {
            "joint_moment": self.joint_moment,
            "success_prob": self.success_prob,
            "normalized_moment": self.normalized_moment,
            "alice_plus": self.alice_plus,
            "q1_matches_record": self.q1_matches_record,
            "q2_matches_record": self.q2_matches_record,
        }
        out.update({f"friend_records.{k}": v for k, v in self.friend_records.items()})
        out.update({f"w_outcomes.{k}": v for k, v in self.w_outcomes.items()})
        out.update({f"emitted.{k}": v for k, v in self.emitted.items()})
        return out

    def as_dict(self) -> dict:
        return {
            "convention": self.convention,
            "jointMomentUnnormalized": self.joint_moment,
            "successProb": self.success_prob,
            "normalizedMoment": self.normalized_moment,
            "friendRecordDistribution": dict(self.friend_records),
            "aliceMarginalPlus": self.alice_plus,
            "emittedQubitStateLabel": self.emitted_label,
            "emittedDistribution": dict(self.emitted),
            "wOutcomeDistribution": dict(self.w_outcomes),
            "pQ1MatchesRecord": self.q1_matches_record,
            "pQ2MatchesRecord": self.q2_matches_record,
            "frameOrdering": list(self.frame_ordering),
            "executedOrder": list(self.executed_order),
        }


def max_difference(a: ExactResults, b: ExactResults) -> float:
    """Largest absolute difference over the numeric fields of two exact results."""
    fa, fb = a.numeric_fields(), b.numeric_fields()
    worst = 0.0
    for key in set(fa) | set(fb):
        va, vb = fa.get(key, 0.0), fb.get(key, 0.0)
        if (va is None) != (vb is None):
            return math.inf
        if va is not None:
            worst = max(worst, abs(va - vb))
    return worst


def run_exact(config: ProtocolConfig) -> ExactResults:
    """Enumerate every branch of the protocol and sum Born-weighted results."""
    schedule = build_schedule(config)
    leaves = _leaves(schedule, config)
    total = sum(b.weight for b in leaves)
    if abs(total - 1) > 1e-12:
        raise InvariantViolation(f"branch weights sum to {total!r}")
    weak = config.scheme is Scheme.WEAK
    records = dict.fromkeys(RECORD_LABELS, 0.0)
    emitted: dict = {}
    for b in leaves:
        records[b.record] += b.weight
        emitted[b.emitted] = emitted.get(b.emitted, 0.0) + b.weight
    alice_plus = sum(b.weight for b in leaves if b.alice == +1)
    if weak:
        joint = sum(b.weight * b.moment for b in leaves)
        success = sum(b.weight for b in leaves if b.postselection == "++")
        normalized = joint / success if success > weakmeas.SINGULAR_TOL else None
        w_out = {k: sum(b.weight for b in leaves if b.postselection == k) for k in POSTSELECTION_OUTCOMES}
        q1m = q2m = None
    else:
        joint = success = normalized = None
        w_out = {
            f"q1={a:+d},q2={c:+d}": sum(b.weight for b in leaves if (b.q1, b.q2) == (a, c))
            for a in (1, -1)
            for c in (1, -1)
        }
        declared = [b for b in leaves if b.record != UNDECLARED]
        mass = sum(b.weight for b in declared)
        q1m = sum(b.weight for b in declared if b.q1 == _record_value(b.record)) / mass if mass else None
        q2m = sum(b.weight for b in declared if b.q2 == _record_value(b.record)) / mass if mass else None
    return ExactResults(
        joint_moment=joint,
        success_prob=success,
        normalized_moment=normalized,
        friend_records=records,
        alice_plus=alice_plus,
        emitted=emitted,
        w_outcomes=w_out,
        q1_matches_record=q1m,
        q2_matches_record=q2m,
        frame_ordering=schedule.ordering.ids,
        executed_order=schedule.executed,
    )


def _record_value(label: str) -> int:
    return +1 if label.endswith("+") else -1


# ---------------------------------------------------------------- sampling


@dataclass(frozen=True)
class RunRecord:
    frame_ordering: tuple
    friend_record: str
    ancilla: bool
    emitted: str
    alice: int
    postselected: bool | None = None
    x1: float | None = None
    x2: float | None = None
    q1: int | None = None
    q2: int | None = None

    @property
    def friend_basis(self):
        return None if self.friend_record == UNDECLARED else self.friend_record[0]


class _Batch:
    """Per-trial output columns for one chunk of trials."""

    def __init__(self, n: int):
        self.record = np.zeros(n, dtype=np.int8)
        self.ancilla = np.zeros(n, dtype=bool)
        self.emitted = np.zeros(n, dtype=np.int16)
        self.alice = np.zeros(n, dtype=np.int8)
        self.postselected = np.zeros(n, dtype=bool)
        self.x1 = np.full(n, np.nan)
        self.x2 = np.full(n, np.nan)
        self.q1 = np.zeros(n, dtype=np.int8)
        self.q2 = np.zeros(n, dtype=np.int8)
        self.emitted_labels: list[str] = []

    def write(self, branch: Branch, rows, x1=None, x2=None):
        self.record[rows] = RECORD_LABELS.index(branch.record)
        self.ancilla[rows] = branch.ancilla
        if branch.emitted not in self.emitted_labels:
            self.emitted_labels.append(branch.emitted)
        self.emitted[rows] = self.emitted_labels.index(branch.emitted)
        self.alice[rows] = branch.alice or 0
        self.postselected[rows] = branch.postselection == "++"
        self.q1[rows] = branch.q1 or 0
        self.q2[rows] = branch.q2 or 0
        if x1 is not None:
            self.x1[rows] = x1
            self.x2[rows] = x2


def _choose_rows(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized cumulative inversion matching :func:`registers.choose`."""
    cum = np.atleast_2d(cum)
    k = np.sum(cum <= (u * cum[:, -1])[:, None], axis=1)
    return np.minimum(k, cum.shape[1] - 1)


def _walk(branch, steps, config, rows, U, out: _Batch, x1=None, x2=None):
    if rows.size == 0:
        return
    if not steps:
        out.write(branch, rows, x1, x2)
        return
    (_, action), rest = steps[0], steps[1:]
    outcomes, slot = _outcomes(action, config)
    if outcomes is None:
        if action == "read":
            x1, x2 = weakmeas.sample_positions_batch(branch.state, U[rows, SLOT_X1], U[rows, SLOT_X2])
        _walk(_deterministic(branch, action, config), rest, config, rows, U, out, x1, x2)
        return
    if not branch.read:
        kids = _children(branch, action, config)
        cum = np.cumsum([p for p, _ in kids])
        pick = _choose_rows(np.broadcast_to(cum, (rows.size, cum.size)), U[rows, slot])
        for k, (_, child) in enumerate(kids):
            sel = pick == k
            _walk(child, rest, config, rows[sel], U, out, x1, x2)
        return
    # Pointers already read: probabilities depend on each trial's positions.
    h = branch.state
    base = np.sum(np.abs(weakmeas.condition_amplitudes(h, x1, x2)) ** 2, axis=1)
    projected, probs = [], []
    for projections, update in outcomes:
        hk = h
        for register, vector in projections:
            hk = weakmeas.project_register(hk, register, vector)
        projected.append((hk, update))
        if hk.n_terms == 0 or not np.any(hk.amp):
            probs.append(np.zeros(rows.size))
        else:
            probs.append(np.sum(np.abs(weakmeas.condition_amplitudes(hk, x1, x2)) ** 2, axis=1) / base)
    pick = _choose_rows(np.cumsum(np.stack(probs, axis=1), axis=1), U[rows, slot])
    for k, (hk, update) in enumerate(projected):
        sel = pick == k
        if sel.any():
            child = branch.evolve(state=hk, **update)
            _walk(child, rest, config, rows[sel], U, out, x1[sel], x2[sel])


def _run_rows(config: ProtocolConfig, schedule: Schedule, U: np.ndarray) -> _Batch:
    out = _Batch(U.shape[0])
    _walk(Branch(), schedule.steps, config, np.arange(U.shape[0]), U, out)
    return out


def _slots_from(rng) -> np.ndarray:
    if isinstance(rng, TrialStream):
        return np.asarray(rng.slots, dtype=float)
    return np.array([rng.random() for _ in range(N_SLOTS)], dtype=float)


def _records(batch: _Batch, ordering, weak: bool):
    for i in range(batch.record.size):
        yield RunRecord(
            frame_ordering=ordering,
            friend_record=RECORD_LABELS[batch.record[i]],
            ancilla=bool(batch.ancilla[i]),
            emitted=batch.emitted_labels[batch.emitted[i]],
            alice=int(batch.alice[i]),
            postselected=bool(batch.postselected[i]) if weak else None,
            x1=float(batch.x1[i]) if weak else None,
            x2=float(batch.x2[i]) if weak else None,
            q1=None if weak else int(batch.q1[i]),
            q2=None if weak else int(batch.q2[i]),
        )


def run_trial(config: ProtocolConfig, rng) -> RunRecord:
    """Execute one trial, sampling each stochastic step from ``rng``.

    ``rng`` is a :class:`TrialStream` (draws reserved per step) or any object
    with ``random()``, from which the per-step draws are taken in slot order.
    """
    schedule = build_schedule(config)
    batch = _run_rows(config, schedule, _slots_from(rng)[None, :])
    return next(_records(batch, schedule.ordering.ids, config.scheme is Scheme.WEAK))


def iter_trials(config: ProtocolConfig, n: int | None = None, seed: int | None = None, start: int = 0):
    """Yield RunRecords for trials ``start .. start + n - 1`` of the seeded stream."""
    n = config.trials if n is None else int(n)
    seed = config.seed if seed is None else int(seed)
    schedule = build_schedule(config)
    weak = config.scheme is Scheme.WEAK
    for lo in range(start, start + n, CHUNK):
        hi = min(lo + CHUNK, start + n)
        batch = _run_rows(config, schedule, trial_uniforms(seed, np.arange(lo, hi)))
        yield from _records(batch, schedule.ordering.ids, weak)


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    n: int

    def as_dict(self):
        return {"value": self.value, "se": self.se, "n": self.n}


@dataclass(frozen=True)
class SummaryStats:
    n: int
    seed: int
    moment: Estimate | None
    success: Estimate | None
    normalized_moment: Estimate | None
    friend_records: dict
    alice_plus: Estimate
    emitted: dict
    q1_matches_record: Estimate | None
    q2_matches_record: Estimate | None

    def as_dict(self) -> dict:
        def est(e):
            return None if e is None else e.as_dict()

        return {
            "convention": "unnormalized",
            "trials": self.n,
            "seed": self.seed,
            "jointMomentUnnormalized": est(self.moment),
            "successProb": est(self.success),
            "normalizedMoment": est(self.normalized_moment),
            "friendRecordDistribution": {k: v.as_dict() for k, v in self.friend_records.items()},
            "aliceMarginalPlus": est(self.alice_plus),
            "emittedDistribution": {k: v.as_dict() for k, v in self.emitted.items()},
            "pQ1MatchesRecord": est(self.q1_matches_record),
            "pQ2MatchesRecord": est(self.q2_matches_record),
        }


def _chunk_sums(config: ProtocolConfig, schedule: Schedule, seed: int, lo: int, hi: int) -> dict:
    b = _run_rows(config, schedule, trial_uniforms(seed, np.arange(lo, hi)))
    s = {"n": hi - lo}
    if config.scheme is Scheme.WEAK:
        prod = b.x1 * b.x2
        y = np.where(b.postselected, prod, 0.0)
        s.update(
            y=float(np.sum(y)),
            y2=float(np.sum(y * y)),
            succ=int(np.sum(b.postselected)),
            cy=float(np.sum(prod[b.postselected])),
            cy2=float(np.sum(prod[b.postselected] ** 2)),
        )
    else:
        rec = np.array([_record_value(l) if l != UNDECLARED else 0 for l in RECORD_LABELS])[b.record]
        declared = rec != 0
        s.update(
            declared=int(np.sum(declared)),
            q1m=int(np.sum(declared & (b.q1 == rec))),
            q2m=int(np.sum(declared & (b.q2 == rec))),
        )
    s["records"] = np.bincount(b.record, minlength=len(RECORD_LABELS))
    s["alice"] = int(np.sum(b.alice == 1))
    s["emitted"] = {lab: int(np.sum(b.emitted == i)) for i, lab in enumerate(b.emitted_labels)}
    return s


def _mean_se(total: float, total_sq: float, n: int) -> Estimate:
    mean = total / n
    var = (total_sq - n * mean * mean) / (n - 1) if n > 1 else 0.0
    return Estimate(mean, math.sqrt(max(var, 0.0) / n), n)


def _freq(count: int, n: int) -> Estimate:
    f = count / n
    return Estimate(f, math.sqrt(f * (1 - f) / n), n)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_monte_carlo(config: ProtocolConfig, n: int | None = None, seed: int | None = None, workers: int | None = None):
    """Sample ``n`` trials and aggregate unbiased estimators with standard errors.

    Trials are processed in fixed chunks whose partial sums are combined in
    chunk order, so the result is identical for any worker count.
    """
    n = config.trials if n is None else int(n)
    seed = config.seed if seed is None else int(seed)
    if n < 1:
        raise ConfigurationError("trials must be >= 1")
    workers = default_workers() if workers is None else max(1, int(workers))
    schedule = build_schedule(config)
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    if workers == 1:
        parts = [_chunk_sums(config, schedule, seed, lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _chunk_sums(config, schedule, seed, *b), bounds))

    def total(key):
        acc = 0
        for p in parts:
            acc = acc + p[key]
        return acc

    records_count = total("records")
    emitted_count: dict = {}
    for p in parts:
        for k, v in p["emitted"].items():
            emitted_count[k] = emitted_count.get(k, 0) + v
    moment = success = normalized = q1m = q2m = None
    if config.scheme is Scheme.WEAK:
        moment = _mean_se(total("y"), total("y2"), n)
        success = _freq(total("succ"), n)
        ns = total("succ")
        normalized = _mean_se(total("cy"), total("cy2"), ns) if ns else None
    else:
        nd = total("declared")
        if nd:
            q1m = _freq(total("q1m"), nd)
            q2m = _freq(total("q2m"), nd)
    return SummaryStats(
        n=n,
        seed=seed,
        moment=moment,
        success=success,
        normalized_moment=normalized,
        friend_records={lab: _freq(int(records_count[i]), n) for i, lab in enumerate(RECORD_LABELS)},
        alice_plus=_freq(total("alice"), n),
        emitted={k: _freq(v, n) for k, v in emitted_count.items()},
        q1_matches_record=q1m,
        q2_matches_record=q2m,
    )


# ---------------------------------------------------------------- comparisons


def signalling_witness(config: ProtocolConfig) -> dict:
    """Toggle Alice's basis (z vs x) in a frame where she measures before E2.

    Returns W's exact unnormalized moment with Alice in z minus that with
    Alice in x, under both interpretation modes. A nonzero difference under
    ``UNITARY_LAB`` means Alice's basis choice is readable from W's pointers.
    """
    beta_star = config.beta_star
    if beta_star is None or not config.boost > beta_star:
        raise ConfigurationError(
            f"signalling test needs beta > beta* = {beta_star!r}, got beta = {config.boost!r}: "
            "no ordering inversion; test undefined"
        )
    out = {"beta": config.boost, "beta_star": beta_star}
    for mode in Mode:
        base = config.with_(mode=mode, scheme=Scheme.WEAK)
        mz = run_exact(base.with_(alice_angle=0.0)).joint_moment
        mx = run_exact(base.with_(alice_angle=math.pi / 2)).joint_moment
        diff = mz - mx
        out[mode.value] = {
            "moment_alice_z": mz,
            "moment_alice_x": mx,
            "difference": diff,
            "signalling": abs(diff) > 1e-9,
        }
    return out


def frame_difference(config: ProtocolConfig, beta_r: float = 0.0, beta_rp: float | None = None) -> float:
    """Exact unnormalized moment in R (beta_r) minus that in R' (beta_rp)."""
    if beta_rp is None:
        beta_rp = (config.beta_star + 1) / 2
    mr = run_exact(config.with_(boost=beta_r, scheme=Scheme.WEAK)).joint_moment
    mp = run_exact(config.with_(boost=beta_rp, scheme=Scheme.WEAK)).joint_moment
    return mr - mp
