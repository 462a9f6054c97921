"""Frame-dependent measurement records in a relativistic Wigner-friend protocol."""

from .config import ConfigDocument, format_config, parse_config, parse_config_document
from .engine import (
    ExactResults,
    Mode,
    ProtocolConfig,
    RunRecord,
    Scheme,
    SummaryStats,
    build_schedule,
    declare_record,
    friend_send_qubits,
    iter_trials,
    run_exact,
    run_monte_carlo,
    run_trial,
    signalling_witness,
)
from .relativity import Boost, Event, default_events
from .streams import TrialStream

__version__ = "0.1.0"

__all__ = [
    "Boost",
    "ConfigDocument",
    "Event",
    "ExactResults",
    "Mode",
    "ProtocolConfig",
    "RunRecord",
    "Scheme",
    "SummaryStats",
    "TrialStream",
    "build_schedule",
    "declare_record",
    "default_events",
    "format_config",
    "friend_send_qubits",
    "iter_trials",
    "parse_config",
    "parse_config_document",
    "run_exact",
    "run_monte_carlo",
    "run_trial",
    "signalling_witness",
]
