"""Flat ``key = value`` run configuration.

Numbers accept plain literals and small arithmetic with ``pi``
(``envelope.area = pi/4``). Grids are comma-separated lists or
``start:stop:count`` (inclusive, evenly spaced).
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParseError, SidebandError, ValidationError
from .hilbert import SidebandWindow
from .model import Generator, ProtocolParams, PulseEnvelope, Shape


class Scenario(str, Enum):
    FIG1 = "fig1"
    FIG2 = "fig2"
    DETUNING = "detuning"
    LEAKAGE = "leakage"
    BLOCH_SIEGERT = "bloch_siegert"
    CUSTOM = "custom"


DEFAULTS = {
    "scenario": "fig1",
    "generator": "auto",
    "omega": 1.0,
    "omega0": 1.0,
    "alpha": 1 / math.sqrt(2),
    "phi": 0.0,
    "envelope.shape": "square",
    "envelope.area": math.pi / 4,
    "envelope.duration": 10.0,
    "envelope.sigma_fraction": 0.15,
    "window.n0": 0,
    "window.half_width": 10,
    "integrator.step_fraction": 0.02,
    "samples": 400,
    "seed": 0,
    "output_dir": "out",
    "grid.alpha": "0:1:21",
    "grid.phi": "0, pi/2, pi, 3*pi/2",
    "grid.delta_over_G0": "-12:12:25",
    "grid.T": "10:100:9:log",
    "grid.delta_scan_over_G0": "-0.5:0.5:21",
    "leakage.phase_average": 8,
}

_ARM_KEYS = ("shape", "area", "duration", "sigma_fraction")
KNOWN_KEYS = (
    set(DEFAULTS)
    | {f"envelope_{arm}.{k}" for arm in "AB" for k in _ARM_KEYS}
    | {"window.n_min", "window.n_max"}
)

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}


def eval_number(text: str) -> float:
    """Evaluate a numeric literal or simple arithmetic expression over ``pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt" and len(node.args) == 1:
            return math.sqrt(ev(node.args[0]))
        raise ValueError(f"unsupported expression {text!r}")

    return ev(ast.parse(text.strip(), mode="eval"))


def parse_grid(text: str) -> np.ndarray:
    """``a, b, c`` or ``start:stop:count[:log]``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3].strip() != "log"):
            raise ValueError(f"bad range {text!r}")
        start, stop = eval_number(parts[0]), eval_number(parts[1])
        num = int(eval_number(parts[2]))
        if len(parts) == 4:
            return np.geomspace(start, stop, num)
        return np.linspace(start, stop, num)
    return np.array([eval_number(x) for x in text.split(",") if x.strip()])


@dataclass
class RunConfig:
    scenario: Scenario
    params: ProtocolParams
    generator: Generator = Generator.RWA
    output_dir: str = "out"
    samples: int = 400
    seed: int = 0
    grids: dict = field(default_factory=dict)
    phase_average: int = 8
    raw: dict = field(default_factory=dict)  # resolved key -> canonical text

    def echo_lines(self) -> list:
        return [f"{k} = {v}" for k, v in sorted(self.raw.items())]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Enum):
        return v.value
    return str(v)


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a config; defaults fill every missing key."""
    given = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        if key not in KNOWN_KEYS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in given:
            raise ParseError(f"duplicate key {key!r}", lineno)
        given[key] = value
    for k, v in (overrides or {}).items():
        if k not in KNOWN_KEYS:
            raise ValidationError(f"unknown key {k!r}")
        given[k] = str(v)
    try:
        return _build(given)
    except SidebandError:
        raise
    except (ValueError, SyntaxError, TypeError) as exc:
        raise ValidationError(str(exc)) from exc


def _build(given: dict) -> RunConfig:
    def raw(key):
        return given.get(key, DEFAULTS.get(key))

    def num(key):
        v = raw(key)
        return float(v) if isinstance(v, (int, float)) else eval_number(v)

    def integer(key):
        v = num(key)
        if v != int(v):
            raise ValidationError(f"{key} must be an integer, got {v}")
        return int(v)

    try:
        scenario = Scenario(str(raw("scenario")).strip())
        gen_text = str(raw("generator")).strip().lower()
        if gen_text == "auto":
            # the beyond-RWA studies only make sense with the counter-rotating terms on
            gen_text = "full" if scenario in (Scenario.LEAKAGE, Scenario.BLOCH_SIEGERT) else "rwa"
        generator = Generator(gen_text)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    alpha = num("alpha")
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")

    envs = {}
    for arm in "AB":
        arm_cfg = {}
        for k in _ARM_KEYS:
            v = given.get(f"envelope_{arm}.{k}", raw(f"envelope.{k}"))
            arm_cfg[k] = v
        try:
            shape = Shape(str(arm_cfg["shape"]).strip().lower())
        except ValueError:
            raise ValidationError(f"unknown envelope shape {arm_cfg['shape']!r}") from None
        to_f = lambda x: float(x) if isinstance(x, (int, float)) else eval_number(x)  # noqa: E731
        envs[arm] = PulseEnvelope(shape, to_f(arm_cfg["area"]), to_f(arm_cfg["duration"]), to_f(arm_cfg["sigma_fraction"]))

    n0 = integer("window.n0")
    hw = integer("window.half_width")
    n_min = integer("window.n_min") if "window.n_min" in given else n0 - hw
    n_max = integer("window.n_max") if "window.n_max" in given else n0 + hw
    window = SidebandWindow(n_min, n_max, n0)

    params = ProtocolParams(
        omega=num("omega"),
        omega0=num("omega0"),
        envelope_A=envs["A"],
        envelope_B=envs["B"],
        alpha=alpha,
        phi=num("phi"),
        window=window,
        step_fraction=num("integrator.step_fraction"),
    )
    samples = integer("samples")
    if samples < 2:
        raise ValidationError("samples must be >= 2")
    phase_average = integer("leakage.phase_average")
    if phase_average < 1:
        raise ValidationError("leakage.phase_average must be >= 1")
    grids = {k: parse_grid(str(raw(f"grid.{k}"))) for k in ("alpha", "phi", "delta_over_G0", "T", "delta_scan_over_G0")}
    if np.any((grids["alpha"] < 0) | (grids["alpha"] > 1)):
        raise ValidationError("grid.alpha entries must lie in [0, 1]")
    if np.any(grids["T"] <= 0):
        raise ValidationError("grid.T entries must be positive")

    resolved = {
        "scenario": scenario.value,
        "generator": generator.value,
        "omega": params.omega,
        "omega0": params.omega0,
        "alpha": params.alpha,
        "phi": params.phi,
        "window.n0": window.n0,
        "window.n_min": window.n_min,
        "window.n_max": window.n_max,
        "integrator.step_fraction": params.step_fraction,
        "samples": samples,
        "seed": integer("seed"),
        "output_dir": str(raw("output_dir")),
        "leakage.phase_average": phase_average,
    }
    for arm, env in envs.items():
        for k in _ARM_KEYS:
            resolved[f"envelope_{arm}.{k}"] = getattr(env, k)
    for k in ("alpha", "phi", "delta_over_G0", "T", "delta_scan_over_G0"):
        resolved[f"grid.{k}"] = ", ".join(repr(float(x)) for x in grids[k])

    return RunConfig(
        scenario=scenario,
        params=params,
        generator=generator,
        output_dir=resolved["output_dir"],
        samples=samples,
        seed=resolved["seed"],
        grids=grids,
        phase_average=phase_average,
        raw={k: _fmt(v) for k, v in resolved.items()},
    )
