"""Linearized AVR plant, closed-loop assembly and the two simulation
protocols (set-point tracking and load-disturbance rejection).

Loop topology::

    r -->(+)-- e --> C(s) -- u --> amplifier --> exciter --(+)--> generator --+--> y
          -|                                               ^ d                |
           +------------------------ sensor <---------------------------------+

All channels of one loop share the characteristic polynomial, so they
are realized together and simulated once per initial condition.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from fopid_avr.errors import InvalidParams, SingularEquilibrium
from fopid_avr.folib import ControllerGenes, OustaloupConfig, fopid_tf
from fopid_avr.lti import (
    Polynomial,
    SimTrace,
    TransferFunction,
    poly_mul,
    proper_part,
    realize_common,
    simulate,
    steady_state,
    tf_feedback,
    tf_series,
    time_grid,
)

# Admissible ranges as printed for each block, widened where needed to admit
# the nominal operating point.
PARAM_RANGES = {
    "K_A": (10.0, 400.0),
    "tau_A": (0.02, 0.1),
    "K_E": (1.0, 400.0),
    "tau_E": (0.4, 1.0),
    "K_G": (0.7, 1.0),
    "tau_G": (1.0, 2.0),
    "tau_S": (0.001, 0.06),
}

JSON_KEYS = {
    "KA": "K_A",
    "tauA": "tau_A",
    "KE": "K_E",
    "tauE": "tau_E",
    "KG": "K_G",
    "tauG": "tau_G",
    "KS": "K_S",
    "tauS": "tau_S",
}


@dataclass(frozen=True)
class AvrPlantParams:
    K_A: float = 10.0
    tau_A: float = 0.1
    K_E: float = 1.0
    tau_E: float = 0.4
    K_G: float = 1.0
    tau_G: float = 1.0
    K_S: float = 1.0
    tau_S: float = 0.01

    def range_warnings(self) -> list[str]:
        out = []
        for name, (lo, hi) in PARAM_RANGES.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                out.append(f"{name}={v} outside typical range [{lo}, {hi}]")
        return out

    def replace(self, **changes) -> AvrPlantParams:
        return AvrPlantParams(**{**asdict(self), **changes})

    def to_json_dict(self) -> dict:
        return {key: getattr(self, attr) for key, attr in JSON_KEYS.items()}

    @classmethod
    def from_json_dict(cls, data: dict) -> AvrPlantParams:
        unknown = set(data) - set(JSON_KEYS)
        if unknown:
            raise InvalidParams(f"unknown plant keys: {sorted(unknown)}")
        params = cls(**{JSON_KEYS[k]: float(v) for k, v in data.items()})
        for msg in params.range_warnings():
            warnings.warn(msg, stacklevel=2)
        return params

    @classmethod
    def from_json(cls, path) -> AvrPlantParams:
        return cls.from_json_dict(json.loads(Path(path).read_text()))


class ProtocolKind(str, Enum):
    TRACKING = "tracking"
    DISTURBANCE = "disturbance"


class DisturbanceSite(str, Enum):
    GENERATOR_INPUT = "generator-input"
    GENERATOR_OUTPUT = "generator-output"


@dataclass(frozen=True)
class SimProtocol:
    horizon: float
    dt: float = 1e-3
    kind: ProtocolKind = ProtocolKind.TRACKING

    def __post_init__(self):
        if self.horizon <= 0 or self.dt <= 0:
            raise InvalidParams("horizon and dt must be positive")
        object.__setattr__(self, "kind", ProtocolKind(self.kind))

    @property
    def t(self) -> np.ndarray:
        return time_grid(self.horizon, self.dt)


CASE_HORIZONS = {"I": 10.0, "II": 20.0, "III": 20.0}


def case_protocols(case_id: str, dt: float = 1e-3, horizon: float | None = None):
    """(tracking, disturbance) protocols with the per-case default horizon."""
    h = CASE_HORIZONS[case_id] if horizon is None else horizon
    return (
        SimProtocol(h, dt, ProtocolKind.TRACKING),
        SimProtocol(h, dt, ProtocolKind.DISTURBANCE),
    )


@dataclass(frozen=True)
class PlantBlocks:
    amplifier: TransferFunction
    exciter: TransferFunction
    generator: TransferFunction
    sensor: TransferFunction


def plant_blocks(params: AvrPlantParams) -> PlantBlocks:
    for name in ("tau_A", "tau_E", "tau_G", "tau_S"):
        if getattr(params, name) <= 0:
            raise InvalidParams(f"{name} must be positive, got {getattr(params, name)}")
    lag = TransferFunction.first_order_lag
    return PlantBlocks(
        lag(params.K_A, params.tau_A),
        lag(params.K_E, params.tau_E),
        lag(params.K_G, params.tau_G),
        lag(params.K_S, params.tau_S),
    )


def build_plant(params: AvrPlantParams) -> tuple[TransferFunction, TransferFunction]:
    """(amplifier·exciter·generator, sensor)."""
    b = plant_blocks(params)
    return tf_series(tf_series(b.amplifier, b.exciter), b.generator), b.sensor


@dataclass(frozen=True)
class LoopChannels:
    """Numerators over the shared characteristic polynomial ``den``.

    ``u_from_r`` may be improper for an ideal derivative; ``u_impulsive``
    marks that its polynomial part was dropped (see ``_regular_numerator``).
    """

    den: Polynomial
    y_from_r: Polynomial
    u_from_r: Polynomial
    e_from_r: Polynomial
    y_from_d: Polynomial
    u_from_d: Polynomial
    u_impulsive: bool


def _regular_numerator(num: Polynomial, den: Polynomial) -> tuple[Polynomial, bool]:
    """Numerator of the part of num/den seen on the sampling grid for a
    step input applied at t=0.

    For an improper ratio q(s) + rem/den, the s^k (k >= 1) terms of q only
    produce impulses at t=0; the constant term and the remainder remain.
    """
    g = TransferFunction(num, den)
    if g.is_proper():
        return num, False
    q, rem = proper_part(g)
    q0 = q.coeffs[-1]
    return rem.num + den.scale(q0), bool(np.any(q.coeffs[:-1] != 0.0))


class DerivativeOn(str, Enum):
    ERROR = "error"
    MEASUREMENT = "measurement"


def controller_split(
    genes: ControllerGenes,
    cfg: OustaloupConfig = OustaloupConfig(),
    derivative_on: DerivativeOn = DerivativeOn.ERROR,
) -> tuple[TransferFunction, TransferFunction]:
    """(reference path, feedback path) of u = Cr r - Cy ym over one denominator.

    With the derivative on the error both paths equal C(s); on the
    measurement the derivative term is removed from the reference path.
    """
    full = fopid_tf(genes, cfg)
    if DerivativeOn(derivative_on) is DerivativeOn.ERROR or genes.Kd == 0.0:
        return full, full
    pi_part = fopid_tf(ControllerGenes(genes.Kp, genes.Ki, 0.0, genes.lam, genes.mu), cfg)
    # lift the PI part onto the full denominator: full.den = pi.den * extra
    extra, rem = np.polydiv(full.den.coeffs, pi_part.den.coeffs)
    if pi_part.is_zero():
        ref = TransferFunction([0.0], full.den)
    else:
        if np.max(np.abs(rem)) > 1e-9 * np.max(np.abs(full.den.coeffs)):
            raise ValueError("controller denominators are not nested")
        ref = TransferFunction(poly_mul(pi_part.num, Polynomial(extra)), full.den)
    return ref, full


def assemble_loop(
    controller,
    params: AvrPlantParams,
    disturbance_at: DisturbanceSite = DisturbanceSite.GENERATOR_INPUT,
) -> LoopChannels:
    """Closed-loop channels for ``controller``: one TransferFunction acting
    on the error, or a ``(reference, feedback)`` pair over a common
    denominator as returned by ``controller_split``."""
    if isinstance(controller, TransferFunction):
        c_ref = c_fb = controller
    else:
        c_ref, c_fb = controller
        if c_ref.den != c_fb.den:
            raise ValueError("controller paths must share a denominator")
    b = plant_blocks(params)
    drive = tf_series(b.amplifier, b.exciter)
    na, da = drive.num, drive.den
    ng, dg = b.generator.num, b.generator.den
    nh, dh = b.sensor.num, b.sensor.den
    nr, nf, dc = c_ref.num, c_fb.num, c_fb.den

    def prod(*ps):
        out = Polynomial([1.0])
        for p in ps:
            out = poly_mul(out, p)
        return out

    # characteristic polynomial of the loop C_fb * drive * generator * sensor
    loop_tf = tf_series(tf_series(c_fb, drive), b.generator)
    den = tf_feedback(loop_tf, b.sensor).den
    y_r = prod(nr, na, ng, dh)
    e_r = den - prod(nr, na, ng, nh)
    if c_ref is c_fb:
        e_r = prod(dc, da, dg, dh)
    u_r, impulsive = _regular_numerator(prod(nr, da, dg, dh), den)
    if DisturbanceSite(disturbance_at) is DisturbanceSite.GENERATOR_INPUT:
        y_d = prod(ng, dc, da, dh)
        u_d = prod(nf, nh, ng, da).scale(-1.0)
    else:
        y_d = prod(dc, da, dg, dh)
        u_d = prod(nf, nh, dg, da).scale(-1.0)
    return LoopChannels(
        den=den,
        y_from_r=y_r,
        u_from_r=u_r,
        e_from_r=e_r,
        y_from_d=y_d,
        u_from_d=u_d,
        u_impulsive=impulsive,
    )


def simulate_tracking(
    genes: ControllerGenes,
    params: AvrPlantParams = AvrPlantParams(),
    proto: SimProtocol = SimProtocol(10.0),
    cfg: OustaloupConfig = OustaloupConfig(),
    derivative_on: DerivativeOn = DerivativeOn.ERROR,
) -> SimTrace:
    """Unit reference step at t=0 from rest.

    ``e`` is the controller input r - (sensor output); ``u`` is the
    controller output driving the amplifier.
    """
    if ProtocolKind(proto.kind) is not ProtocolKind.TRACKING:
        raise ValueError("simulate_tracking needs a tracking protocol")
    loop = assemble_loop(controller_split(genes, cfg, derivative_on), params)
    t = proto.t
    r = np.ones_like(t)
    ss = realize_common([loop.y_from_r, loop.u_from_r, loop.e_from_r], loop.den)
    y, u, e = simulate(ss, r, proto.dt)
    return SimTrace(proto.dt, t, r, y, u, e, impulse_dropped=loop.u_impulsive)


def simulate_disturbance(
    genes: ControllerGenes,
    params: AvrPlantParams = AvrPlantParams(),
    proto: SimProtocol = SimProtocol(20.0, kind=ProtocolKind.DISTURBANCE),
    cfg: OustaloupConfig = OustaloupConfig(),
    disturbance_at: DisturbanceSite = DisturbanceSite.GENERATOR_INPUT,
    magnitude: float = 1.0,
    derivative_on: DerivativeOn = DerivativeOn.ERROR,
) -> SimTrace:
    """Unit load step at t=0 with the loop resting at its reference=1
    equilibrium. ``e`` holds the load error 1 - y."""
    if ProtocolKind(proto.kind) is not ProtocolKind.DISTURBANCE:
        raise ValueError("simulate_disturbance needs a disturbance protocol")
    if genes.Ki <= 0.0:
        raise SingularEquilibrium("load-disturbance protocol needs integral action (Ki > 0)")
    loop = assemble_loop(controller_split(genes, cfg, derivative_on), params, disturbance_at)
    t = proto.t
    r = np.ones_like(t)
    ref_ss = realize_common([loop.y_from_r, loop.u_from_r], loop.den)
    x_eq = steady_state(ref_ss, 1.0)
    y_r, u_r = simulate(ref_ss, r, proto.dt, x_eq)
    dist_ss = realize_common([loop.y_from_d, loop.u_from_d], loop.den)
    y_d, u_d = simulate(dist_ss, magnitude * r, proto.dt)
    y = y_r + y_d
    u = u_r + u_d
    return SimTrace(proto.dt, t, r, y, u, 1.0 - y)
