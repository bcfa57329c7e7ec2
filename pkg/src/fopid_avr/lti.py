"""Polynomial and transfer-function algebra, state-space realization and
fixed-step RK4 simulation of linear time-invariant systems.

Polynomials store coefficients highest power first, as ``numpy.polyval``
expects. Every object here is immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from fopid_avr import _backend
from fopid_avr.errors import (
    DegenerateLoop,
    ImproperTransferFunction,
    NumericalDivergence,
    SingularEquilibrium,
)

DIVERGENCE_LIMIT = 1e12
# RK4 stability interval on the negative real axis is about [-2.785, 0].
RK4_STABILITY_LIMIT = 2.785


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


class Polynomial:
    """Real polynomial, coefficients highest power first.

    Leading zeros are stripped, so the zero polynomial is ``[0.0]``.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).ravel()
        if c.size == 0:
            c = np.zeros(1)
        nz = np.flatnonzero(c)
        c = c[nz[0]:] if nz.size else np.zeros(1)
        self._c = _frozen(c)

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return self._c.size - 1

    def is_zero(self) -> bool:
        return self._c.size == 1 and self._c[0] == 0.0

    def __call__(self, s):
        return np.polyval(self._c, s)

    def __mul__(self, other: Polynomial) -> Polynomial:
        return poly_mul(self, other)

    def __add__(self, other: Polynomial) -> Polynomial:
        return Polynomial(np.polyadd(self._c, other._c))

    def __sub__(self, other: Polynomial) -> Polynomial:
        return Polynomial(np.polysub(self._c, other._c))

    def scale(self, k: float) -> Polynomial:
        return Polynomial(self._c * k)

    def roots(self) -> np.ndarray:
        return np.roots(self._c) if self.degree > 0 else np.zeros(0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._c.shape == other._c.shape and bool(np.all(self._c == other._c))

    def __hash__(self):
        return hash(self._c.tobytes())

    def __repr__(self) -> str:
        return f"Polynomial({self._c.tolist()})"


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    """Product of two polynomials (coefficient convolution)."""
    return Polynomial(np.convolve(a.coeffs, b.coeffs))


def _as_poly(p) -> Polynomial:
    return p if isinstance(p, Polynomial) else Polynomial(p)


class TransferFunction:
    """Rational function num(s)/den(s) of a SISO LTI block."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=1.0):
        self.num = _as_poly(num)
        self.den = _as_poly(den)
        if self.den.is_zero():
            raise ZeroDivisionError("transfer function denominator is the zero polynomial")

    @classmethod
    def gain(cls, k: float) -> TransferFunction:
        return cls([k], [1.0])

    @classmethod
    def first_order_lag(cls, k: float, tau: float) -> TransferFunction:
        """k / (1 + tau s)."""
        return cls([k], [tau, 1.0])

    @property
    def relative_degree(self) -> int:
        return self.den.degree - self.num.degree

    def is_proper(self) -> bool:
        return self.num.is_zero() or self.num.degree <= self.den.degree

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def freqresp(self, w) -> np.ndarray:
        return self(1j * np.asarray(w, dtype=float))

    def dcgain(self) -> float:
        return float(self.num.coeffs[-1] / self.den.coeffs[-1])

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def zeros(self) -> np.ndarray:
        return self.num.roots()

    def __mul__(self, other: TransferFunction) -> TransferFunction:
        return tf_series(self, other)

    def __add__(self, other: TransferFunction) -> TransferFunction:
        return tf_parallel(self, other)

    def __repr__(self) -> str:
        return f"TransferFunction(num={self.num.coeffs.tolist()}, den={self.den.coeffs.tolist()})"


def _cancel_common_roots(num: Polynomial, den: Polynomial, tol: float):
    zs = list(num.roots())
    ps = list(den.roots())
    kept_z = []
    for z in zs:
        match = next(
            (i for i, p in enumerate(ps) if abs(p - z) <= tol * max(1.0, abs(z))), None
        )
        if match is None:
            kept_z.append(z)
        else:
            ps.pop(match)
    if len(kept_z) == len(zs):
        return num, den
    new_num = Polynomial(num.coeffs[0] * np.real(np.poly(kept_z)) if kept_z else [num.coeffs[0]])
    new_den = Polynomial(den.coeffs[0] * np.real(np.poly(ps)) if ps else [den.coeffs[0]])
    return new_num, new_den


def tf_series(
    g1: TransferFunction, g2: TransferFunction, cancel_tol: float | None = None
) -> TransferFunction:
    """Cascade g1·g2.

    Shared roots are cancelled only when ``cancel_tol`` is given.
    """
    num = poly_mul(g1.num, g2.num)
    den = poly_mul(g1.den, g2.den)
    if cancel_tol is not None and not num.is_zero():
        num, den = _cancel_common_roots(num, den, cancel_tol)
    return TransferFunction(num, den)


def tf_parallel(g1: TransferFunction, g2: TransferFunction) -> TransferFunction:
    """Sum g1 + g2 over the common denominator den1·den2."""
    if g1.den == g2.den:
        return TransferFunction(g1.num + g2.num, g1.den)
    return TransferFunction(
        poly_mul(g1.num, g2.den) + poly_mul(g2.num, g1.den), poly_mul(g1.den, g2.den)
    )


def tf_feedback(forward: TransferFunction, sensor: TransferFunction) -> TransferFunction:
    """Negative-feedback loop forward / (1 + forward·sensor)."""
    num = poly_mul(forward.num, sensor.den)
    char = poly_mul(forward.den, sensor.den) + poly_mul(forward.num, sensor.num)
    if char.is_zero():
        raise DegenerateLoop("1 + forward*sensor vanishes identically")
    return TransferFunction(num, char)


def proper_part(g: TransferFunction) -> tuple[Polynomial, TransferFunction]:
    """Split g into polynomial part q(s) and proper remainder: g = q + r/den."""
    if g.is_proper():
        return Polynomial([0.0]), g
    q, r = np.polydiv(g.num.coeffs, g.den.coeffs)
    n = g.den.degree
    rem = np.zeros(max(n, 1))
    r = np.asarray(r)[-n:] if n > 0 else np.zeros(0)
    rem[rem.size - r.size:] = r
    return Polynomial(q), TransferFunction(rem, g.den)


@dataclass(frozen=True)
class StateSpace:
    """x' = A x + B u,  y = C x + D u  (single input, ``p`` outputs).

    ``C`` has shape ``(p, n)`` and ``D`` shape ``(p,)``; ``p`` is 1 for
    a realization of a single transfer function.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        n = int(round(np.sqrt(A.size)))
        A = A.reshape(n, n)
        B = np.array(self.B, dtype=float).reshape(n)
        D = np.atleast_1d(np.array(self.D, dtype=float)).reshape(-1)
        C = np.array(self.C, dtype=float).reshape(D.size, n)
        if A.shape != (n, n) or C.shape[0] != D.shape[0]:
            raise ValueError("inconsistent state-space dimensions")
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, _frozen(val))

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def freqresp(self, w) -> np.ndarray:
        """Complex response at angular frequencies ``w``, shape (p, len(w))."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        n = self.order
        out = np.empty((self.n_outputs, w.size), dtype=complex)
        for i, wi in enumerate(w):
            if n:
                x = np.linalg.solve(1j * wi * np.eye(n) - self.A, self.B)
                out[:, i] = self.C @ x + self.D
            else:
                out[:, i] = self.D
        return out


def realize_common(nums, den: Polynomial) -> StateSpace:
    """Controllable canonical realization of several proper numerators
    sharing one denominator (one output row per numerator)."""
    den = _as_poly(den)
    n = den.degree
    a = den.coeffs / den.coeffs[0]
    rows, feed = [], []
    for num in nums:
        num = _as_poly(num)
        if not num.is_zero() and num.degree > n:
            raise ImproperTransferFunction(
                f"numerator degree {num.degree} exceeds denominator degree {n}"
            )
        b = np.zeros(n + 1)
        b[n + 1 - num.coeffs.size:] = num.coeffs / den.coeffs[0]
        feed.append(b[0])
        rows.append(b[1:] - b[0] * a[1:])
    A = np.zeros((n, n))
    if n:
        A[0, :] = -a[1:]
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros(n)
    if n:
        B[0] = 1.0
    return StateSpace(A, B, np.array(rows).reshape(len(rows), n), np.array(feed))


def tf_to_statespace(g: TransferFunction) -> StateSpace:
    """Controllable canonical form of a proper transfer function."""
    if not g.is_proper():
        raise ImproperTransferFunction(
            f"numerator degree {g.num.degree} exceeds denominator degree {g.den.degree}"
        )
    return realize_common([g.num], g.den)


def rk4_step_matrices(A: np.ndarray, B: np.ndarray, dt: float):
    """Exact one-step map of classical RK4 on x' = A x + B u with u held
    over the step: x+ = Phi x + Gamma u."""
    n = A.shape[0]
    eye = np.eye(n)
    hA = dt * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    phi = eye + hA + hA2 / 2.0 + hA3 / 6.0 + (hA3 @ hA) / 24.0
    gamma = dt * ((eye + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ B)
    return phi, gamma


def check_step_size(ss: StateSpace, dt: float) -> None:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if ss.order:
        rho = float(np.max(np.abs(np.linalg.eigvals(ss.A))))
        if rho * dt > RK4_STABILITY_LIMIT:
            raise ValueError(
                f"dt={dt} too large for fastest mode |lambda|={rho:.4g} (RK4 limit {RK4_STABILITY_LIMIT})"
            )


def simulate(ss: StateSpace, u, dt: float, x0=None, *, check_dt: bool = True) -> np.ndarray:
    """Fixed-step RK4 response to the zero-order-held input samples ``u``.

    Returns shape ``(len(u),)`` for single-output systems, else ``(p, len(u))``.
    Raises NumericalDivergence if any state exceeds 1e12 in magnitude.
    """
    if check_dt:
        check_step_size(ss, dt)
    u = np.ascontiguousarray(u, dtype=float).ravel()
    n = ss.order
    x0 = np.zeros(n) if x0 is None else np.ascontiguousarray(x0, dtype=float).ravel()
    if n:
        phi, gamma = rk4_step_matrices(ss.A, ss.B, dt)
    else:
        phi, gamma = np.zeros((0, 0)), np.zeros(0)
    y, _, bad = _backend.propagate(
        np.ascontiguousarray(phi),
        np.ascontiguousarray(gamma),
        np.ascontiguousarray(ss.C),
        np.ascontiguousarray(ss.D),
        u,
        x0,
        DIVERGENCE_LIMIT,
    )
    if bad >= 0:
        raise NumericalDivergence(f"state exceeded {DIVERGENCE_LIMIT:g} at sample {bad}")
    return y[0] if ss.n_outputs == 1 else y


def steady_state(ss: StateSpace, constant_input: float, cond_limit: float = 1e12) -> np.ndarray:
    """Equilibrium state x with A x + B u = 0.

    Singularity is judged on the diagonally balanced A, since companion
    matrices are badly scaled even when well posed.
    """
    n = ss.order
    if n == 0:
        return np.zeros(0)
    ab, scale = scipy.linalg.matrix_balance(ss.A, permute=False, separate=True)
    scale = scale[0]
    if not np.isfinite(np.linalg.cond(ab)) or np.linalg.cond(ab) > cond_limit:
        raise SingularEquilibrium("state matrix is singular; no unique equilibrium")
    xb = np.linalg.solve(ab, -(ss.B / scale) * constant_input)
    return xb * scale


@dataclass(frozen=True)
class SimTrace:
    """Uniformly sampled closed-loop signals, ``t[k] = k*dt``."""

    dt: float
    t: np.ndarray
    r: np.ndarray
    y: np.ndarray
    u: np.ndarray
    e: np.ndarray
    # True when an impulsive term at t=0 (ideal derivative kick) is not representable on the grid.
    impulse_dropped: bool = False

    def __post_init__(self):
        lengths = {len(a) for a in (self.t, self.r, self.y, self.u, self.e)}
        if len(lengths) != 1:
            raise ValueError("trace arrays differ in length")
        for name in ("t", "r", "y", "u", "e"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in (self.r, self.y, self.u, self.e))

    def as_rows(self):
        return np.column_stack([self.t, self.r, self.y, self.u, self.e])


def time_grid(horizon: float, dt: float) -> np.ndarray:
    n = int(round(horizon / dt))
    return np.arange(n + 1) * dt


@dataclass(frozen=True)
class StepMetrics:
    overshoot: float
    settling_time_2pct: float
    rise_time_10_90: float
    peak_time: float
    steady_state_value: float
    settled: bool = field(default=True)


def step_metrics(trace: SimTrace, band: float = 0.02, tail_fraction: float = 0.05) -> StepMetrics:
    """Overshoot, 2% settling, 10-90% rise and peak time of ``trace.y``.

    The final value is the mean of the last ``tail_fraction`` of samples.
    ``settled`` is False when the response is still outside the band
    inside that tail window.
    """
    y, t = np.asarray(trace.y), np.asarray(trace.t)
    if y.size == 0:
        raise ValueError("empty trace")
    n_tail = max(1, int(np.ceil(tail_fraction * y.size)))
    y_final = float(np.mean(y[-n_tail:]))
    sign = 1.0 if y_final >= 0 else -1.0
    ys = sign * y
    yf = abs(y_final)
    if yf > 0:
        overshoot = max(0.0, (float(np.max(ys)) - yf) / yf)
    else:
        overshoot = 0.0
    tol = band * yf if yf > 0 else band
    outside = np.flatnonzero(np.abs(y - y_final) > tol)
    if outside.size == 0:
        settling, settled = 0.0, True
    else:
        last = outside[-1]
        settled = bool(last < y.size - n_tail)
        settling = float(t[min(last + 1, y.size - 1)])
    rise = float("nan")
    if yf > 0:
        lo = np.flatnonzero(ys >= 0.1 * yf)
        hi = np.flatnonzero(ys >= 0.9 * yf)
        if lo.size and hi.size:
            rise = float(t[hi[0]] - t[lo[0]])
    peak_time = float(t[int(np.argmax(ys))])
    return StepMetrics(overshoot, settling, rise, peak_time, y_final, settled)
