"""Fractional-order operators: Oustaloup band-limited approximation of s^alpha,
Grünwald-Letnikov numerical differ-integration, and the PI^lambda D^mu
controller realization."""

from __future__ import annotations

from dataclasses import dataclass, astuple

import numpy as np

from fopid_avr import _backend
from fopid_avr.errors import InvalidParams
from fopid_avr.lti import Polynomial, TransferFunction, poly_mul, tf_parallel, tf_series

GAIN_BOUNDS = (0.0, 100.0)
ORDER_BOUNDS = (0.0, 2.0)


@dataclass(frozen=True)
class OustaloupConfig:
    """Fitting band [omega_b, omega_h] (rad/s) and half-order N; filter order 2N+1."""

    N: int = 2
    omega_b: float = 1e-2
    omega_h: float = 1e2

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParams(f"N must be a positive integer, got {self.N}")
        if not 0 < self.omega_b < self.omega_h:
            raise InvalidParams("need 0 < omega_b < omega_h")

    @property
    def order(self) -> int:
        return 2 * self.N + 1


@dataclass(frozen=True)
class ControllerGenes:
    """Decision vector of C(s) = Kp + Ki / s^lam + Kd s^mu.

    ``lam == mu == 1`` exactly selects the integer-order PID.
    """

    Kp: float
    Ki: float
    Kd: float
    lam: float = 1.0
    mu: float = 1.0

    @property
    def is_pid(self) -> bool:
        return self.lam == 1.0 and self.mu == 1.0

    def in_bounds(self) -> bool:
        lo, hi = GAIN_BOUNDS
        olo, ohi = ORDER_BOUNDS
        return all(lo <= g <= hi for g in (self.Kp, self.Ki, self.Kd)) and all(
            olo <= o <= ohi for o in (self.lam, self.mu)
        )

    def as_array(self, mode: str = "fopid") -> np.ndarray:
        vals = astuple(self)
        return np.array(vals[:3] if mode == "pid" else vals, dtype=float)

    @classmethod
    def from_array(cls, x) -> ControllerGenes:
        """3 entries give a PID, 5 entries a FOPID."""
        x = [float(v) for v in x]
        if len(x) == 3:
            return cls(*x)
        if len(x) == 5:
            return cls(*x)
        raise ValueError(f"expected 3 or 5 genes, got {len(x)}")


def gene_bounds(mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper box bounds for ``mode`` in {"pid", "fopid"}."""
    if mode == "pid":
        return np.full(3, GAIN_BOUNDS[0]), np.full(3, GAIN_BOUNDS[1])
    if mode == "fopid":
        lo = np.array([GAIN_BOUNDS[0]] * 3 + [ORDER_BOUNDS[0]] * 2)
        hi = np.array([GAIN_BOUNDS[1]] * 3 + [ORDER_BOUNDS[1]] * 2)
        return lo, hi
    raise ValueError(f"unknown controller mode {mode!r}")


def oustaloup_frequencies(alpha: float, cfg: OustaloupConfig = OustaloupConfig()):
    """Zero corners, pole corners and gain of the recursive approximation."""
    n = cfg.N
    ratio = cfg.omega_h / cfg.omega_b
    k = np.arange(-n, n + 1)
    poles = cfg.omega_b * ratio ** ((k + n + 0.5 * (1 + alpha)) / (2 * n + 1))
    zeros = cfg.omega_b * ratio ** ((k + n + 0.5 * (1 - alpha)) / (2 * n + 1))
    return zeros, poles, cfg.omega_h**alpha


def oustaloup_filter(alpha: float, cfg: OustaloupConfig = OustaloupConfig()) -> TransferFunction:
    """Rational approximation K * prod (s + w'_k) / (s + w_k) of s^alpha.

    Zero/pole pairs that coincide exactly are left out, so ``alpha == 0``
    yields the unit gain.
    """
    zeros, poles, gain = oustaloup_frequencies(alpha, cfg)
    num = Polynomial([gain])
    den = Polynomial([1.0])
    for z, p in zip(zeros, poles):
        if z == p:
            continue
        num = poly_mul(num, Polynomial([1.0, z]))
        den = poly_mul(den, Polynomial([1.0, p]))
    return TransferFunction(num, den)


def gl_weights(alpha: float, n: int) -> np.ndarray:
    """Signed binomial weights (-1)^j C(alpha, j) by the running product."""
    w = np.empty(n)
    if n == 0:
        return w
    w[0] = 1.0
    for j in range(1, n):
        w[j] = w[j - 1] * (1.0 - (alpha + 1.0) / j)
    return w


def gl_differint(f, alpha: float, dt: float) -> np.ndarray:
    """Grünwald-Letnikov differ-integral of the samples ``f`` (full memory).

    out[k] = dt^-alpha * sum_{j=0..k} w_j f[k-j]
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = np.ascontiguousarray(f, dtype=float).ravel()
    w = gl_weights(alpha, f.size)
    return dt ** (-alpha) * _backend.gl_convolve(f, w)


def fopid_tf(genes: ControllerGenes, cfg: OustaloupConfig = OustaloupConfig()) -> TransferFunction:
    """Rational realization of Kp + Ki s^-lam + Kd s^mu.

    PID mode is the exact (Kd s^2 + Kp s + Ki) / s. Otherwise the
    fractional integrator is realized as (1/s) * approx(s^(1-lam)) so the
    controller keeps a true pole at the origin. Terms with zero gain are
    omitted.
    """
    terms = []
    if genes.Kp != 0.0:
        terms.append(TransferFunction.gain(genes.Kp))
    if genes.is_pid:
        if genes.Ki != 0.0:
            terms.append(TransferFunction([genes.Ki], [1.0, 0.0]))
        if genes.Kd != 0.0:
            terms.append(TransferFunction([genes.Kd, 0.0], [1.0]))
    else:
        if genes.Ki != 0.0:
            integ = TransferFunction([genes.Ki], [1.0, 0.0])
            terms.append(tf_series(integ, oustaloup_filter(1.0 - genes.lam, cfg)))
        if genes.Kd != 0.0:
            deriv = oustaloup_filter(genes.mu, cfg)
            terms.append(TransferFunction(deriv.num.scale(genes.Kd), deriv.den))
    if not terms:
        return TransferFunction([0.0], [1.0])
    c = terms[0]
    for term in terms[1:]:
        c = tf_parallel(c, term)
    return c
