"""Integral performance indices and the per-case objective vectors.

Case I  -> (J1, J2)       tracking ITSE, control-deviation integral
Case II -> (J1, J3)       tracking ITSE, load-disturbance ITSE
Case III-> (J1, J3, J2)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from fopid_avr.avr import (
    AvrPlantParams,
    DerivativeOn,
    DisturbanceSite,
    case_protocols,
    simulate_disturbance,
    simulate_tracking,
)
from fopid_avr.errors import NumericalDivergence, SingularEquilibrium
from fopid_avr.folib import ControllerGenes, OustaloupConfig
from fopid_avr.lti import SimTrace

logger = logging.getLogger(__name__)

PENALTY = 1e9
TAIL_FRACTION = 0.05

CASE_OBJECTIVES = {
    "I": ("J1", "J2"),
    "II": ("J1", "J3"),
    "III": ("J1", "J3", "J2"),
}


class J2Mode(str, Enum):
    DEVIATION = "deviation"
    INCREMENT = "increment"


def _left_riemann(weights: np.ndarray, dt: float) -> float:
    # the last sample sits on the right end of [0, T]
    return float(np.sum(weights[:-1]) * dt)


def itse(trace: SimTrace) -> float:
    """J1 = sum t_k e_k^2 dt over the tracking horizon."""
    return _left_riemann(trace.t * trace.e**2, trace.dt)


def itse_load(trace: SimTrace) -> float:
    """J3 = sum t_k e_ld,k^2 dt over a disturbance trace."""
    return _left_riemann(trace.t * trace.e**2, trace.dt)


def isdco(trace: SimTrace, mode: J2Mode = J2Mode.DEVIATION) -> float:
    """J2, squared control-signal change integrated over the horizon.

    ``deviation``: (u_k - u_ss)^2 with u_ss the mean of the final 5% of u.
    ``increment``: (u_k - u_{k-1})^2 with u_{-1} = 0 (the loop starts at rest).
    """
    u = np.asarray(trace.u)
    if J2Mode(mode) is J2Mode.DEVIATION:
        n_tail = max(1, int(np.ceil(TAIL_FRACTION * u.size)))
        du = u - np.mean(u[-n_tail:])
    else:
        du = np.diff(u, prepend=0.0)
    return _left_riemann(du**2, trace.dt)


@dataclass(frozen=True)
class ObjectiveVector:
    case_id: str
    values: tuple[float, ...]
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.names:
            object.__setattr__(self, "names", CASE_OBJECTIVES[self.case_id])
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    @property
    def penalized(self) -> bool:
        return any(v >= PENALTY for v in self.values)


@dataclass(frozen=True)
class EvalSettings:
    """Everything besides the genes that fixes an objective evaluation."""

    case_id: str = "I"
    params: AvrPlantParams = AvrPlantParams()
    cfg: OustaloupConfig = OustaloupConfig()
    dt: float = 1e-3
    horizon: float | None = None
    disturbance_at: DisturbanceSite = DisturbanceSite.GENERATOR_INPUT
    j2_mode: J2Mode = J2Mode.DEVIATION
    derivative_on: DerivativeOn = DerivativeOn.ERROR

    def __post_init__(self):
        if self.case_id not in CASE_OBJECTIVES:
            raise ValueError(f"unknown case {self.case_id!r}")
        object.__setattr__(self, "disturbance_at", DisturbanceSite(self.disturbance_at))
        object.__setattr__(self, "j2_mode", J2Mode(self.j2_mode))
        object.__setattr__(self, "derivative_on", DerivativeOn(self.derivative_on))

    @property
    def protocols(self):
        return case_protocols(self.case_id, self.dt, self.horizon)


def evaluate(genes: ControllerGenes, settings: EvalSettings = EvalSettings()) -> ObjectiveVector:
    """Case-ordered objective vector; any simulation failure maps every
    component to ``PENALTY``."""
    names = CASE_OBJECTIVES[settings.case_id]
    tracking, disturbance = settings.protocols
    try:
        scores = {}
        tr = simulate_tracking(
            genes, settings.params, tracking, settings.cfg, settings.derivative_on
        )
        if not tr.is_finite():
            raise NumericalDivergence("non-finite tracking trace")
        scores["J1"] = itse(tr)
        if "J2" in names:
            scores["J2"] = isdco(tr, settings.j2_mode)
        if "J3" in names:
            dtr = simulate_disturbance(
                genes,
                settings.params,
                disturbance,
                settings.cfg,
                settings.disturbance_at,
                derivative_on=settings.derivative_on,
            )
            if not dtr.is_finite():
                raise NumericalDivergence("non-finite disturbance trace")
            scores["J3"] = itse_load(dtr)
        values = tuple(scores[n] for n in names)
        if not all(np.isfinite(values)):
            raise NumericalDivergence("non-finite objective")
    except (NumericalDivergence, SingularEquilibrium) as exc:
        logger.debug("penalized %s: %s", genes, exc)
        values = (PENALTY,) * len(names)
    return ObjectiveVector(settings.case_id, tuple(min(v, PENALTY) for v in values))


class CaseEvaluator:
    """Picklable callable mapping a gene array to the objective array."""

    def __init__(self, settings: EvalSettings, mode: str):
        if mode not in ("pid", "fopid"):
            raise ValueError(f"unknown controller mode {mode!r}")
        self.settings = settings
        self.mode = mode

    def genes(self, x) -> ControllerGenes:
        return ControllerGenes.from_array(x)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self.genes(x), self.settings).as_array()
