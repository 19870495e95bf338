"""Quadrature polynomials of Trotterized controlled phase rotations.

A parameter vector ``(lam_m, mu_m, ..., lam_1, mu_1)`` defines the gate sequence

.. math::

    S(t) = \\prod_{j=1}^{m} e^{i t \\lambda_j x_1 x_2^2 / 2} e^{i t \\mu_j x_1 p_2^2 / 2}

with the product running right to left, so ``mu_1`` acts first. Conjugating the
second-mode quadratures by ``S`` yields four polynomials in ``t x_1``
(``pxx, pxp, ppx, ppp``) that approximate ``(cos, sin, -sin, cos)``.
The same polynomials describe the three-mode Toffoli-based variant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "ParamVector",
    "QuadPolys",
    "MomentumPolys",
    "IdealPolys",
    "build_polys",
    "eval_polys",
    "momentum_polys",
    "identity_residual",
    "order_condition_residuals",
    "taylor_mismatch",
    "supnorm_error",
]


@dataclass(frozen=True)
class ParamVector:
    """Gate strengths of one Trotter sequence.

    :param entries: even-length array ``(lam_m, mu_m, ..., lam_1, mu_1)``.
    :param repetitions: the sequence is applied ``repetitions`` times with every
        strength divided by ``repetitions``.
    :param reverse: read ``entries`` as ``(lam_1, mu_1, ..., lam_m, mu_m)``
        instead (application order left to right).
    """

    entries: np.ndarray
    repetitions: int = 1
    reverse: bool = False

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float).ravel()
        if arr.size % 2:
            raise ValueError(f"parameter vector needs even length, got {arr.size}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be a positive integer")
        if not np.all(np.isfinite(arr)):
            raise ValueError("parameter vector has non-finite entries")
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "repetitions", int(self.repetitions))

    @property
    def m(self) -> int:
        return self.entries.size // 2

    @property
    def total_gates(self) -> int:
        """Number of controlled quadratic gates, zero strengths included."""
        return 2 * self.m * self.repetitions

    @property
    def active_gates(self) -> int:
        """Number of gates with nonzero strength."""
        return int(np.count_nonzero(self.entries)) * self.repetitions

    def pairs(self) -> np.ndarray:
        """``(lam, mu)`` rows in application order, repetitions unrolled.

        Within a row ``mu`` acts before ``lam``.
        """
        if self.m == 0:
            return np.zeros((0, 2))
        rows = self.entries.reshape(-1, 2)
        if not self.reverse:
            rows = rows[::-1]
        return np.tile(rows, (self.repetitions, 1)) / self.repetitions

    def gate_sequence(self) -> list[tuple[str, float]]:
        """Flat ``[("p", mu_1), ("x", lam_1), ...]`` list in application order."""
        seq = []
        for lam, mu in self.pairs():
            seq.append(("p", float(mu)))
            seq.append(("x", float(lam)))
        return seq


@dataclass(frozen=True)
class QuadPolys:
    """Coefficient arrays (ascending powers) of the four quadrature polynomials."""

    pxx: np.ndarray
    pxp: np.ndarray
    ppx: np.ndarray
    ppp: np.ndarray

    @property
    def degree(self) -> int:
        return max(len(c) for c in self.as_tuple()) - 1

    def as_tuple(self):
        return self.pxx, self.pxp, self.ppx, self.ppp

    def evaluate(self, s):
        return eval_polys(self, s)

    def mu_nu(self, s):
        """Bogoliubov coefficients of ``G a G^dag = mu a + nu a^dag`` at ``s``."""
        xx, xp, px, pp = eval_polys(self, s)
        mu = 0.5 * (xx + pp + 1j * (px - xp))
        nu = 0.5 * (xx - pp + 1j * (px + xp))
        return mu, nu


@dataclass(frozen=True)
class IdealPolys:
    """Exact trigonometric limit, usable wherever a :class:`QuadPolys` is evaluated."""

    degree: float = field(default=np.inf)

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        c, sn = np.cos(s), np.sin(s)
        return c, sn, -sn, c

    def mu_nu(self, s):
        s = np.asarray(s, dtype=float)
        return np.exp(-1j * s), np.zeros_like(s, dtype=complex)


@dataclass(frozen=True)
class MomentumPolys:
    """First-mode momentum correction polynomials ``p1, p2, p3``."""

    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray


def _as_params(params) -> ParamVector:
    if isinstance(params, ParamVector):
        return params
    return ParamVector(np.asarray(params, dtype=float))


def build_polys(params) -> QuadPolys:
    """Run the pairwise recursion over every gate of ``params``.

    Each pair ``(lam, mu)`` maps

    ``pxx <- (1 - lam mu t^2) pxx - lam t pxp``, ``pxp <- pxp + mu t pxx``,
    ``ppx <- (1 - lam mu t^2) ppx - lam t ppp``, ``ppp <- ppp + mu t ppx``.
    """
    pv = _as_params(params)
    if pv.m == 0:
        raise ValueError("empty parameter vector")
    pairs = pv.pairs()
    deg = 2 * len(pairs)
    xx = np.zeros(deg + 1)
    xp = np.zeros(deg + 1)
    px = np.zeros(deg + 1)
    pp = np.zeros(deg + 1)
    xx[0] = pp[0] = 1.0

    def t_times(c, k=1):
        out = np.zeros_like(c)
        out[k:] = c[:-k]
        return out

    for lam, mu in pairs:
        xp_new = xp + mu * t_times(xx)
        xx_new = xx - lam * mu * t_times(xx, 2) - lam * t_times(xp)
        pp_new = pp + mu * t_times(px)
        px_new = px - lam * mu * t_times(px, 2) - lam * t_times(pp)
        xx, xp, px, pp = xx_new, xp_new, px_new, pp_new
    return QuadPolys(*(P.polytrim(c, 0.0) for c in (xx, xp, px, pp)))


def identity_polys() -> QuadPolys:
    return QuadPolys(np.array([1.0]), np.array([0.0]), np.array([0.0]), np.array([1.0]))


def eval_polys(polys: QuadPolys, t):
    """Evaluate ``(pxx, pxp, ppx, ppp)`` at ``t`` (scalar or array) by Horner's rule."""
    t = np.asarray(t, dtype=float)
    out = []
    for c in polys.as_tuple():
        acc = np.zeros_like(t)
        for a in c[::-1]:
            acc = acc * t + a
        out.append(acc)
    return tuple(out)


def momentum_polys(polys: QuadPolys) -> MomentumPolys:
    """``p1 = xx' px - xx px'``, ``p2 = xp' pp - xp pp'``, ``p3 = xx' pp - xp px'``."""
    d = P.polyder
    xx, xp, px, pp = polys.as_tuple()

    def sub(a, b):
        return P.polysub(a, b)

    p1 = sub(P.polymul(d(xx), px), P.polymul(xx, d(px)))
    p2 = sub(P.polymul(d(xp), pp), P.polymul(xp, d(pp)))
    p3 = sub(P.polymul(d(xx), pp), P.polymul(xp, d(px)))
    return MomentumPolys(p1, p2, p3)


def identity_residual(polys: QuadPolys) -> float:
    """Largest coefficient of ``pxx ppp - pxp ppx - 1``."""
    det = P.polysub(P.polymul(polys.pxx, polys.ppp), P.polymul(polys.pxp, polys.ppx))
    det = np.array(det, dtype=float)
    det[0] -= 1.0
    return float(np.max(np.abs(det)))


def _coef(c, n):
    return c[n] if n < len(c) else 0.0


def order_condition_residuals(params, order: int) -> np.ndarray:
    """Residuals of both alternating-product sums against ``1/n!`` for ``n = 1..order``.

    The sums are read off the Taylor coefficients of the quadrature polynomials:
    for even ``n`` from ``pxx`` and ``ppp``, for odd ``n`` from ``pxp`` and ``-ppx``.
    Returns a flat array ``[r1a, r1b, r2a, r2b, ...]``.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    polys = build_polys(params)
    res = []
    for n in range(1, order + 1):
        if n % 2 == 0:
            sign = (-1) ** (n // 2)
            a, b = sign * _coef(polys.pxx, n), sign * _coef(polys.ppp, n)
        else:
            sign = (-1) ** ((n - 1) // 2)
            a, b = sign * _coef(polys.pxp, n), -sign * _coef(polys.ppx, n)
        res += [a - 1.0 / factorial(n), b - 1.0 / factorial(n)]
    return np.array(res)


def taylor_mismatch(polys: QuadPolys, order: int) -> np.ndarray:
    """Coefficient differences to ``(cos, sin, -sin, cos)`` for powers ``0..order``."""
    out = np.zeros((order + 1, 4))
    for n in range(order + 1):
        cos_n = 0.0 if n % 2 else (-1) ** (n // 2) / factorial(n)
        sin_n = (-1) ** ((n - 1) // 2) / factorial(n) if n % 2 else 0.0
        targets = (cos_n, sin_n, -sin_n, cos_n)
        for j, (c, tgt) in enumerate(zip(polys.as_tuple(), targets)):
            out[n, j] = _coef(c, n) - tgt
    return out


def supnorm_error(polys, t_max: float, samples: int = 512) -> float:
    """Max over ``t in [0, t_max]`` of the Euclidean distance to the trig limit."""
    if t_max <= 0 or samples < 2:
        raise ValueError("need t_max > 0 and samples >= 2")
    t = np.linspace(0.0, t_max, samples)
    xx, xp, px, pp = polys.evaluate(t)
    c, s = np.cos(t), np.sin(t)
    dev = np.sqrt((xx - c) ** 2 + (xp - s) ** 2 + (px + s) ** 2 + (pp - c) ** 2)
    return float(dev.max())
