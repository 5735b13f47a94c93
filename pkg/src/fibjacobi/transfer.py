"""Transfer-matrix cocycle over hull windows.

A solution of the difference equation w_{n+1} u_{n+1} + w_n u_{n-1} = E u_n
is propagated by the unimodular one-step matrices (1/w_n) [[E, -1], [w_n^2, 0]]
acting on states U_n = (u_n, w_n u_{n-1}).  Long products renormalize every
32 factors into a separately tracked log-scale, so Lyapunov exponents and
determinant checks stay finite at any depth.

The half-trace of the cocycle over the level-k Fibonacci block reproduces
the trace-map value x_k, and over a repeated block the Cayley-Hamilton
identity M(2n) - 2 x M(n) + I = 0 holds; both are the operator facts the
non-decay argument for generalized eigenfunctions rests on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tracemap import HoppingPair, trace_value
from .words import SignedWindow, WindowCoverageError, fibonacci, omega_s, square_prefix_block, square_prefix_check

# Cocycle products extract their scale into log form this often.
RENORM_EVERY = 32


class SquareStructureError(ValueError):
    """Window lacks the repeated-block prefix an operator identity needs."""


@dataclass(frozen=True)
class TransferMatrix:
    """2x2 unimodular factor or product; physical matrix = e^log_scale * entries."""

    m11: float
    m12: float
    m21: float
    m22: float
    log_scale: float = 0.0

    def matrix(self) -> np.ndarray:
        """Normalized entries as an ndarray (scale not folded in)."""
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    def physical(self) -> np.ndarray:
        """Entries with the scale folded in; may overflow for deep products."""
        return math.exp(self.log_scale) * self.matrix()

    def det(self) -> float:
        """Physical determinant; use log_abs_det for deep products."""
        return (self.m11 * self.m22 - self.m12 * self.m21) * math.exp(2.0 * self.log_scale)

    def log_abs_det(self) -> float:
        """log |det| of the physical matrix; 0 for unimodular products.

        Extractable only while eps * |M|_F^2 stays below the target
        accuracy (norms up to ~1e3 for 1e-10): beyond that the stored
        entries cancel to rounding noise and the result is meaningless.
        """
        d = self.m11 * self.m22 - self.m12 * self.m21
        if d == 0.0:
            return -math.inf
        return math.log(abs(d)) + 2.0 * self.log_scale

    def trace_half(self) -> float:
        return 0.5 * (self.m11 + self.m22) * math.exp(self.log_scale)

    def log_frobenius(self) -> float:
        return 0.5 * math.log(self.m11**2 + self.m12**2 + self.m21**2 + self.m22**2) + self.log_scale

    def frobenius(self) -> float:
        return math.exp(self.log_frobenius())

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        return TransferMatrix(
            self.m11 * other.m11 + self.m12 * other.m21,
            self.m11 * other.m12 + self.m12 * other.m22,
            self.m21 * other.m11 + self.m22 * other.m21,
            self.m21 * other.m12 + self.m22 * other.m22,
            self.log_scale + other.log_scale,
        )

    def apply(self, vec: tuple[float, float]) -> tuple[float, float]:
        """Physical action on a 2-vector."""
        s = math.exp(self.log_scale)
        return (
            s * (self.m11 * vec[0] + self.m12 * vec[1]),
            s * (self.m21 * vec[0] + self.m22 * vec[1]),
        )


@dataclass(frozen=True)
class SolutionState:
    """Solution data (u_n, w_n u_{n-1}) at position n."""

    u_cur: float
    weighted_prev: float
    position: int

    def norm(self) -> float:
        return math.hypot(self.u_cur, self.weighted_prev)


@dataclass(frozen=True)
class LyapunovEstimate:
    """Slope of log-cocycle-norm against n, fit over Fibonacci checkpoints."""

    gamma: float
    n_used: int
    residual: float


def _hop(p: HoppingPair, letter: str) -> float:
    return p.a if letter == "a" else p.b


def local_matrix(hop: float, E: float) -> TransferMatrix:
    """One-step factor (1/hop) [[E, -1], [hop^2, 0]]."""
    if not hop > 0:
        raise ValueError(f"hopping must be positive, got {hop!r}")
    return TransferMatrix(E / hop, -1.0 / hop, hop, 0.0)


def cocycle(window: SignedWindow, p: HoppingPair, E: float, n: int) -> TransferMatrix:
    """Ordered product of one-step factors over positions n..1 (rightmost first).

    Renormalizes every RENORM_EVERY factors into log_scale, keeping the
    stored entries of order one for products of any depth.
    """
    if n < 1:
        raise ValueError(f"cocycle length must be >= 1, got {n}")
    if not window.covers(1, n):
        raise WindowCoverageError(
            f"cocycle over 1..{n} needs those positions, window covers ({window.lo}, {window.hi})"
        )
    m11, m12, m21, m22 = 1.0, 0.0, 0.0, 1.0
    scale = 0.0
    for pos in range(1, n + 1):
        w = _hop(p, window.letter(pos))
        # Left-multiply by (1/w) [[E, -1], [w^2, 0]].
        m11, m12, m21, m22 = (
            (E * m11 - m21) / w,
            (E * m12 - m22) / w,
            w * m11,
            w * m12,
        )
        if pos % RENORM_EVERY == 0:
            f = math.sqrt(m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22)
            if f > 0.0 and math.isfinite(f):
                m11, m12, m21, m22 = m11 / f, m12 / f, m21 / f, m22 / f
                scale += math.log(f)
    return TransferMatrix(m11, m12, m21, m22, scale)


def evolve_solution(
    window: SignedWindow, p: HoppingPair, E: float, u0: float, u1: float, n_max: int
) -> list[SolutionState]:
    """States U_0..U_{n_max} of the solution with data (u_0, u_1).

    U_0 closes the three-term recurrence at the origin: its weighted-prev
    component is E u_0 - w_1 u_1, which the position-1 factor maps onto
    U_1 = (u_1, w_1 u_0).  Cocycle products over 1..n act on U_0.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if not window.covers(1, n_max):
        raise WindowCoverageError(
            f"evolution to {n_max} needs positions 1..{n_max}, "
            f"window covers ({window.lo}, {window.hi})"
        )
    w1 = _hop(p, window.letter(1))
    states = [SolutionState(float(u0), E * u0 - w1 * u1, 0)]
    u_prev, u_cur = float(u0), float(u1)
    w_cur = w1
    states.append(SolutionState(u_cur, w_cur * u_prev, 1))
    for pos in range(2, n_max + 1):
        w_next = _hop(p, window.letter(pos))
        u_prev, u_cur = u_cur, (E * u_cur - w_cur * u_prev) / w_next
        w_cur = w_next
        states.append(SolutionState(u_cur, w_cur * u_prev, pos))
    return states


def _fibonacci_checkpoints(n: int) -> list[int]:
    pts = []
    j = 1
    while fibonacci(j) <= n:
        pts.append(fibonacci(j))
        j += 1
    return pts


def lyapunov_grid(p: HoppingPair, E, n: int, window: SignedWindow | None = None):
    """Vectorized Lyapunov estimate over an energy grid.

    Returns (gamma, residual, n_used).  One cocycle orbit per energy over
    the given window (the special hull element by default); the exponent is
    the least-squares slope of log Frobenius norm against n over the last
    half of the Fibonacci checkpoints, clamped at 0 from below.
    """
    if n < 5:
        raise ValueError(f"lyapunov needs n >= 5, got {n}")
    checkpoints = _fibonacci_checkpoints(n)
    n_used = checkpoints[-1]
    if window is None:
        window = omega_s(1, n_used)
    elif not window.covers(1, n_used):
        raise WindowCoverageError(
            f"lyapunov over 1..{n_used} needs those positions, "
            f"window covers ({window.lo}, {window.hi})"
        )
    E = np.atleast_1d(np.asarray(E, dtype=float))
    hops = np.array([_hop(p, window.letter(pos)) for pos in range(1, n_used + 1)])
    m11 = np.ones_like(E)
    m12 = np.zeros_like(E)
    m21 = np.zeros_like(E)
    m22 = np.ones_like(E)
    scale = np.zeros_like(E)
    marks = set(checkpoints)
    log_norms = np.empty((len(checkpoints), E.size))
    row = 0
    for pos in range(1, n_used + 1):
        w = hops[pos - 1]
        m11, m12, m21, m22 = (
            (E * m11 - m21) / w,
            (E * m12 - m22) / w,
            w * m11,
            w * m12,
        )
        if pos % RENORM_EVERY == 0:
            f = np.sqrt(m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22)
            m11, m12, m21, m22 = m11 / f, m12 / f, m21 / f, m22 / f
            scale += np.log(f)
        if pos in marks:
            log_norms[row] = 0.5 * np.log(m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22) + scale
            row += 1
    half = len(checkpoints) // 2
    xs = np.array(checkpoints[half:], dtype=float)
    ys = log_norms[half:]
    slope, intercept = np.polyfit(xs, ys, 1)
    fit = np.outer(xs, np.ones(E.size)) * slope + intercept
    residual = np.sqrt(np.mean((ys - fit) ** 2, axis=0))
    gamma = np.clip(slope, 0.0, None)
    return gamma, residual, n_used


def lyapunov(p: HoppingPair, E: float, n: int, window: SignedWindow | None = None) -> LyapunovEstimate:
    """Lyapunov exponent estimate at a single energy; see lyapunov_grid."""
    gamma, residual, n_used = lyapunov_grid(p, np.array([float(E)]), n, window)
    return LyapunovEstimate(float(gamma[0]), n_used, float(residual[0]))


def cayley_hamilton_defect(window: SignedWindow, p: HoppingPair, E: float, k: int) -> float:
    """Residual of M(2n) - 2 x M(n) + I = 0 over a level-k repeated block.

    n is the level-k half-block length and x the matching trace-map value;
    the defect is the Frobenius norm of the left side over 1 + |M(n)|_F^2,
    zero in exact arithmetic whenever the window starts with the square.
    """
    n = square_prefix_block(k)
    if not square_prefix_check(window, k):
        raise SquareStructureError(
            f"window does not start with a level-{k} repeated block on positions 1..{2 * n}"
        )
    x = trace_value(p, E, k + 1)
    m_half = cocycle(window, p, E, n).physical()
    m_full = cocycle(window, p, E, 2 * n).physical()
    lhs = m_full - 2.0 * x * m_half + np.eye(2)
    half_sq = float(np.sum(m_half * m_half))
    return float(np.linalg.norm(lhs)) / (1.0 + half_sq)


def no_decay_witness(
    window: SignedWindow, p: HoppingPair, E: float, k: int, u0: float, u1: float
) -> float:
    """Smallest relative solution mass at the repeated-block return positions.

    Returns min over levels 2..k of max(|U(n')|, |U(2n')|) / |U(0)| with n'
    the level half-block length.  The identity U(2n') - 2x U(n') + U(0) = 0
    bounds this below by 1/(1 + 2 trace_bound) whenever the trace orbit is
    bounded, which is what rules out decaying solutions.
    """
    if u0 == 0.0 and u1 == 0.0:
        raise ValueError("the identically-zero solution carries no information")
    if k < 2:
        raise ValueError(f"witness needs level k >= 2, got {k}")
    for lvl in range(2, k + 1):
        if not square_prefix_check(window, lvl):
            raise SquareStructureError(
                f"window does not start with a level-{lvl} repeated block"
            )
    top = 2 * square_prefix_block(k)
    states = evolve_solution(window, p, E, u0, u1, top)
    base = states[0].norm()
    witness = math.inf
    for lvl in range(2, k + 1):
        n = square_prefix_block(lvl)
        a = states[n].norm()
        b = states[2 * n].norm()
        level_mass = max(a, b)
        if not math.isfinite(level_mass):
            continue
        witness = min(witness, level_mass / base)
    return witness
