"""Text configuration documents for :class:`~wignerframes.engine.ProtocolConfig`.

The format is line oriented::

    # comment
    [angles]
    theta1 = pi/3
    theta2 = 2*pi/3

    [frame]
    beta = 0.2

Numeric values are arithmetic expressions over numbers, ``pi``, ``sqrt(.)``
and complex literals (``0.5j``), so grid angles such as ``pi/2`` are exact.
Mode and scheme names and ``s0`` are bare words. Every key is optional; the
keys left out are reported by :func:`parse_config_document`.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass

from .engine import Mode, ProtocolConfig, Scheme
from .errors import ConfigRangeError, ConfigSyntaxError, ConfigurationError
from .relativity import Event

__all__ = ["ConfigDocument", "SCHEMA", "format_config", "parse_config", "parse_config_document"]

_REAL, _COMPLEX, _INT, _WORD = "real", "complex", "int", "word"

# section -> key -> kind
SCHEMA = {
    "state": {"alpha": _COMPLEX, "beta": _COMPLEX, "s0": _WORD},
    "angles": {"theta1": _REAL, "theta2": _REAL, "alice_basis": _REAL},
    "coupling": {"g": _REAL, "w": _REAL},
    "geometry": {
        "t0": _REAL, "t1": _REAL, "t2": _REAL, "t3": _REAL,
        "x0": _REAL, "x1": _REAL, "x2": _REAL, "x_a": _REAL,
    },
    "frame": {"beta": _REAL},
    "mode": {"interpretation": _WORD, "scheme": _WORD},
    "runs": {"trials": _INT, "seed": _INT},
}

# ProtocolConfig validation messages start with "<field>:"; map them back to keys.
_FIELD_KEYS = {
    "alpha": ("state", "alpha"),
    "alice_angle": ("angles", "alice_basis"),
    "alpha, beta": ("state", "alpha"),
    "s0": ("state", "s0"),
    "theta1": ("angles", "theta1"),
    "theta2": ("angles", "theta2"),
    "g": ("coupling", "g"),
    "w": ("coupling", "w"),
    "beta": ("frame", "beta"),
    "trials": ("runs", "trials"),
    "seed": ("runs", "seed"),
}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi}
_WORD_RE = re.compile(r"[A-Za-z0-9_+-]+")
_FUNCS = {"sqrt": lambda v: math.sqrt(v) if not isinstance(v, complex) and v >= 0 else v**0.5}


def _evaluate(text: str, line: int, column: int):
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        col = column + max((exc.offset or 1) - 1, 0)
        raise ConfigSyntaxError(f"cannot parse expression {text!r}", line, col) from None

    def fail(node, why):
        raise ConfigSyntaxError(why, line, column + getattr(node, "col_offset", 0))

    def ev(node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
                fail(node, f"not a number: {ast.unparse(node)}")
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in _NAMES:
                fail(node, f"unknown name {node.id!r}")
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            try:
                return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
            except (ZeroDivisionError, OverflowError) as exc:
                fail(node, f"{exc} in {ast.unparse(node)!r}")
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            return _FUNCS[node.func.id](ev(node.args[0]))
        fail(node, f"unsupported expression {ast.unparse(node)!r}")

    return ev(tree.body)


def _convert(kind: str, raw: str, line: int, column: int, key: str):
    if kind == _WORD:
        if not _WORD_RE.fullmatch(raw):
            raise ConfigSyntaxError(f"{key}: expected a bare word, got {raw!r}", line, column)
        return raw
    value = _evaluate(raw, line, column)
    if kind == _COMPLEX:
        value = complex(value)
        return value.real if value.imag == 0 else value
    if isinstance(value, complex):
        raise ConfigSyntaxError(f"{key}: expected a real number, got {raw!r}", line, column)
    if kind == _INT:
        if isinstance(value, float):
            if not value.is_integer() or abs(value) >= 2**53:
                raise ConfigSyntaxError(f"{key}: expected an integer, got {raw!r}", line, column)
            value = int(value)
        return value
    return float(value)


@dataclass(frozen=True)
class ConfigDocument:
    """A parsed document: the config, the keys that took defaults and key locations."""

    config: ProtocolConfig
    defaulted: tuple[str, ...]
    locations: dict

    @property
    def given(self) -> tuple[str, ...]:
        return tuple(sorted(self.locations))


def _scan(text: str):
    """Yield ``(section, key, raw_value, line, column)`` and check the layout."""
    section = None
    seen: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        indent = len(line) - len(line.lstrip())
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigSyntaxError("unterminated section header", lineno, indent + 1)
            name = stripped[1:-1].strip()
            if name not in SCHEMA:
                raise ConfigSyntaxError(
                    f"unknown section [{name}]; expected one of {', '.join(SCHEMA)}", lineno, indent + 1
                )
            section = name
            continue
        if "=" not in stripped:
            raise ConfigSyntaxError("expected 'key = value'", lineno, indent + 1)
        key_part, _, value_part = line.partition("=")
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        if section is None:
            raise ConfigSyntaxError(f"key {key!r} outside of any section", lineno, key_col)
        if key not in SCHEMA[section]:
            raise ConfigSyntaxError(
                f"unknown key {key!r} in [{section}]; expected one of {', '.join(SCHEMA[section])}",
                lineno,
                key_col,
            )
        if "#" in value_part:
            value_part = value_part[: value_part.index("#")]
        raw = value_part.strip()
        val_col = len(key_part) + 1 + (len(value_part) - len(value_part.lstrip())) + 1
        if not raw:
            raise ConfigSyntaxError(f"{key}: missing value", lineno, val_col)
        full = f"{section}.{key}"
        if full in seen:
            first_line, first_col = seen[full]
            raise ConfigSyntaxError(
                f"duplicate key {full!r} (first defined at line {first_line}, column {first_col})",
                lineno,
                key_col,
            )
        seen[full] = (lineno, key_col)
        yield section, key, raw, lineno, val_col


def parse_config_document(text: str) -> ConfigDocument:
    """Parse ``text`` into a validated :class:`ConfigDocument`.

    Raises
    ------
    ConfigSyntaxError
        Malformed line, unknown section or key, duplicate key, bad expression.
    ConfigRangeError
        A well-formed value outside its allowed range; names the key.
    """
    values: dict = {}
    locations: dict = {}
    for section, key, raw, line, col in _scan(text):
        full = f"{section}.{key}"
        values[full] = _convert(SCHEMA[section][key], raw, line, col, full)
        locations[full] = (line, col)

    def locate(section, key):
        return locations.get(f"{section}.{key}", (None, None))

    kwargs: dict = {}
    direct = {
        "state.alpha": "alpha",
        "state.beta": "beta",
        "state.s0": "s0",
        "angles.theta1": "theta1",
        "angles.theta2": "theta2",
        "angles.alice_basis": "alice_angle",
        "coupling.g": "g",
        "coupling.w": "w",
        "frame.beta": "boost",
        "runs.trials": "trials",
        "runs.seed": "seed",
    }
    for full, name in direct.items():
        if full in values:
            kwargs[name] = values[full]
    for full, enum in (("mode.interpretation", Mode), ("mode.scheme", Scheme)):
        if full in values:
            try:
                kwargs["mode" if enum is Mode else "scheme"] = enum(values[full].lower())
            except ValueError:
                line, col = locations[full]
                choices = ", ".join(m.value for m in enum)
                raise ConfigRangeError(f"{full}: expected one of {choices}, got {values[full]!r}", full, line, col) from None
    if any(k.startswith("geometry.") for k in values):
        geo = {k: values.get(f"geometry.{k}", v) for k, v in _geometry(ProtocolConfig().events).items()}
        kwargs["events"] = (
            Event("E0", geo["t0"], geo["x0"]),
            Event("E1", geo["t1"], geo["x1"]),
            Event("E2", geo["t2"], geo["x2"]),
            Event("E3", geo["t3"], geo["x_a"]),
        )
    try:
        config = ProtocolConfig(**kwargs)
    except ConfigRangeError:
        raise
    except ConfigurationError as exc:
        message = str(exc)
        field_name = message.split(":", 1)[0]
        section, key = _FIELD_KEYS.get(field_name, (None, None))
        full = f"{section}.{key}" if section else None
        line, col = locate(section, key) if section else (None, None)
        if full:
            label = "state.alpha, state.beta" if field_name == "alpha, beta" else full
            message = label + message[len(field_name):]
        raise ConfigRangeError(message, full, line, col) from None
    defaulted = tuple(f"{s}.{k}" for s, keys in SCHEMA.items() for k in keys if f"{s}.{k}" not in values)
    return ConfigDocument(config, defaulted, locations)


def parse_config(text: str) -> ProtocolConfig:
    """Parse a configuration document; see :func:`parse_config_document`."""
    return parse_config_document(text).config


def _geometry(events) -> dict:
    e = {ev.id: ev for ev in events}
    return {
        "t0": e["E0"].t, "t1": e["E1"].t, "t2": e["E2"].t, "t3": e["E3"].t,
        "x0": e["E0"].x, "x1": e["E1"].x, "x2": e["E2"].x, "x_a": e["E3"].x,
    }


def config_values(config: ProtocolConfig) -> dict:
    """``section.key -> value`` for every key of the document format."""
    out = {
        "state.alpha": config.alpha,
        "state.beta": config.beta,
        "state.s0": config.s0,
        "angles.theta1": config.theta1,
        "angles.theta2": config.theta2,
        "angles.alice_basis": config.alice_angle,
        "coupling.g": config.g,
        "coupling.w": config.w,
        "frame.beta": config.boost,
        "mode.interpretation": config.mode.value,
        "mode.scheme": config.scheme.value,
        "runs.trials": config.trials,
        "runs.seed": config.seed,
    }
    out.update({f"geometry.{k}": v for k, v in _geometry(config.events).items()})
    return out


def _format_value(value) -> str:
    if isinstance(value, complex):
        return repr(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config: ProtocolConfig) -> str:
    """Write every key of ``config``; ``parse_config`` reads it back unchanged."""
    values = config_values(config)
    lines = []
    for section, keys in SCHEMA.items():
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_format_value(values[f'{section}.{key}'])}")
    return "\n".join(lines) + "\n"
