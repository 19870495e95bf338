"""Application pipelines built on the controlled phase rotation and its Rabi-type variant.

Fast paths evaluate closed forms or hybrid grid/Fock representations; the Fock
simulator in :mod:`cvforge.focksim` serves as an independent cross-check.
"""
from __future__ import annotations

from math import factorial
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .gkp import GkpSpec, GridWavefunction, gaussian_gkp, grid_fidelity, optimal_k
from .gridsim import (
    apply_field,
    beam_splitter_basis_change,
    centered_grid,
    displace_x,
    fourier,
    fourier_dagger,
    gaussian_fock_matrices,
    lower,
    momentum_grid,
    number_damping,
    selfdual_grid,
    two_mode_basis,
)
from .polycore import IdealPolys, ParamVector, QuadPolys, build_polys

__all__ = [
    "BranchError",
    "AliasingError",
    "ConditionalResult",
    "CzResult",
    "QubitModeState",
    "branch_sqrt_track",
    "conditional_amplitude",
    "conditional_gkp",
    "p0_density",
    "p0_statistics",
    "p0_total_probability",
    "solve_window",
    "optimal_k",
    "magic_p0",
    "conditional_magic",
    "cz_gate",
    "cz_worst_case",
    "cz_fock_oracle",
    "cz_output_map",
    "cz_fidelity",
    "rabi_matrices",
    "measurement_free_schedule",
    "measurement_free_step",
    "measurement_free_protocol",
    "logical_state_prep",
    "ideal_logical_state_prep",
    "loss_study",
    "LossResult",
    "LOSS_POSITIONS",
]

SQRT_PI = np.sqrt(np.pi)


class BranchError(RuntimeError):
    """The square-root branch cannot be followed on the given grid."""


class AliasingError(RuntimeError):
    """A numeric Fourier transform would wrap significant weight around the grid."""


def _polys(params):
    if params is None or params == "ideal":
        return IdealPolys()
    if isinstance(params, (QuadPolys, IdealPolys)):
        return params
    return build_polys(params)


# ---------------------------------------------------------------- conditional GKP


def _wrapped_steps(a):
    steps = np.diff(np.angle(a))
    return (steps + np.pi) % (2 * np.pi) - np.pi


def _refined_step(func, lo, hi, max_jump, depth):
    # phase change of func between lo and hi, subdividing until every step is small
    sub = np.linspace(lo, hi, 17)
    vals = np.asarray(func(sub), dtype=complex)
    if np.any(vals == 0):
        raise BranchError("curve passes through zero")
    steps = _wrapped_steps(vals)
    for i in np.nonzero(np.abs(steps) > max_jump)[0]:
        if depth == 0:
            raise BranchError("phase jumps too fast between samples; refine the grid")
        steps[i] = _refined_step(func, sub[i], sub[i + 1], max_jump, depth - 1)
    return steps.sum()


def branch_sqrt_track(values, max_jump: float = np.pi / 2, func=None, nodes=None, depth: int = 10) -> np.ndarray:
    """Square root of a sampled complex curve, continued along the samples.

    The phase is unwrapped so that ``f'/f = A'/(2A)`` holds along the sweep and the
    result starts on the principal branch at the first sample. When ``func`` and the
    sample ``nodes`` are given, steps above ``max_jump`` are resolved by evaluating
    ``func`` on recursively refined sub-intervals (near-zeros wind quickly).

    :raises BranchError: on a zero, or on a phase jump above ``max_jump`` that cannot be refined
    """
    a = np.asarray(values, dtype=complex)
    if np.any(a == 0):
        raise BranchError("curve passes through zero")
    raw = np.angle(a)
    steps = _wrapped_steps(a)
    bad = np.nonzero(np.abs(steps) > max_jump)[0]
    if bad.size and func is None:
        raise BranchError("phase jumps too fast between samples; refine the grid")
    for i in bad:
        steps[i] = _refined_step(func, nodes[i], nodes[i + 1], max_jump, depth)
    phase = np.concatenate([[raw[0]], raw[0] + np.cumsum(steps)])
    return np.sqrt(np.abs(a)) * np.exp(0.5j * phase)


def _sqrt_from_origin(A, x, func=None):
    # continue from x = 0 (where A = 1) outwards in both directions
    i0 = int(np.argmin(np.abs(x)))
    right = branch_sqrt_track(A[i0:], func=func, nodes=x[i0:])
    left = branch_sqrt_track(A[: i0 + 1][::-1], func=func, nodes=x[: i0 + 1][::-1])[::-1]
    return np.concatenate([left[:-1], right])


@dataclass
class ConditionalResult:
    psi: GridWavefunction
    p0: float
    probability: float
    fidelity: float
    correction: float
    target: GridWavefunction | None = None
    extra: dict = field(default_factory=dict)


def conditional_amplitude(polys, t, k, alpha, p0, x, correct: bool = True) -> np.ndarray:
    """``<x_1, p_0|psi>`` after the controlled rotation acts on squeezed vacuum and a displaced meter.

    Mode 1 starts as ``exp(-x^2/2k^2)`` (normalized), the meter as ``exp(-i alpha p)|0>``.
    With ``A = pxx + i ppx`` and ``B = ppp - i pxp`` at ``t x_1``::

        psi = N / sqrt(A) exp(-x^2/2k^2 - B p0^2/(2A) - i alpha p0 / A + alpha^2 pxx / (2A))

    where ``N = (pi k)^{-1/2} exp(-Re(alpha)^2/2)`` and ``sqrt(A)`` is branch-tracked
    from ``x = 0``. ``|psi|^2`` integrates over ``x_1`` to the density of ``p_0``.
    With ``correct`` the momentum kick ``exp(-i k^2 x / (2t))`` is applied.
    """
    polys = _polys(polys)
    x = np.asarray(x, dtype=float)
    xx, xp, px, pp = polys.evaluate(t * x)
    A = xx + 1j * px
    B = pp - 1j * xp

    def a_of(xs):
        e = polys.evaluate(t * xs)
        return e[0] + 1j * e[2]

    sq = _sqrt_from_origin(A, x, a_of)
    alpha = complex(alpha)
    norm = (np.pi * k) ** -0.5 * np.exp(-(alpha.real**2) / 2)
    with np.errstate(over="ignore", under="ignore"):
        expo = -(x**2) / (2 * k**2) - B * p0**2 / (2 * A) - 1j * alpha * p0 / A + alpha**2 * xx / (2 * A)
        psi = norm / sq * np.exp(expo)
    if correct:
        psi = psi * np.exp(-1j * k**2 * x / (2 * t))
    return psi


def _default_x(k, d, points=8001):
    ext = max(25.0, 1.5 * (3 * k + 3 / k + d))
    return np.linspace(-ext, ext, points)


def conditional_gkp(params, t, k, alpha=None, p0=0.0, x=None, target: GkpSpec | None = None) -> ConditionalResult:
    """Conditional GKP state for meter outcome ``p0`` and its fidelity to ``target``.

    ``alpha`` defaults to ``k/t`` (spacing ``pi/t``, peak width ``1/k``). The default
    target is the Gaussian comb with ``d = pi/t`` and peak offset given by ``arg(alpha)``.
    ``probability`` is the density of the outcome ``p0``.
    """
    d = np.pi / t
    alpha = k / t if alpha is None else complex(alpha)
    x = _default_x(k, d) if x is None else np.asarray(x, float)
    amp = conditional_amplitude(params, t, k, alpha, p0, x)
    psi = GridWavefunction((x,), amp)
    dens = psi.norm() ** 2
    if target is None:
        target = GkpSpec(d, k, delta=float(np.angle(alpha)))
    tg = gaussian_gkp(target, x)
    extra = {}
    if abs(abs(alpha) - k / t) > 1e-9 * max(1.0, k / t):
        extra["nonstandard_alpha"] = True
    return ConditionalResult(psi.normalized(), p0, dens, grid_fidelity(tg, psi), k**2 / (2 * t), tg, extra)


def p0_density(params, t, k, alpha=None, p0s=(0.0,), x=None) -> np.ndarray:
    """Probability density of the meter outcome at each ``p0``."""
    d = np.pi / t
    alpha = k / t if alpha is None else complex(alpha)
    x = _default_x(k, d) if x is None else np.asarray(x, float)
    polys = _polys(params)
    out = []
    for p0 in np.atleast_1d(p0s):
        amp = conditional_amplitude(polys, t, k, alpha, float(p0), x, correct=False)
        out.append(np.trapezoid(np.abs(amp) ** 2, x))
    return np.array(out)


def p0_total_probability(params, t, k, alpha=None, x=None, nodes: int = 4001, scale: float = 10.0) -> float:
    """Probability of any meter outcome, ``int p0_density dp0`` over the whole line.

    Uses ``p0 = scale tan(theta)`` so that the slowly decaying contributions of
    strongly squeezed meter states are captured; unitarity makes the exact value 1.
    """
    theta = np.linspace(-np.pi / 2, np.pi / 2, nodes + 2)[1:-1]
    p0s = scale * np.tan(theta)
    dens = p0_density(params, t, k, alpha, p0s, x)
    return float(np.trapezoid(dens * scale / np.cos(theta) ** 2, theta))


def p0_statistics(params, t, k, alpha=None, window=(-0.01, 0.01), x=None, target=None, samples: int = 41):
    """Acceptance probability and fidelity statistics over a window of meter outcomes.

    The probability integrates the outcome density with 64-point Gauss-Legendre
    quadrature. The threshold fidelity is the minimum over ``samples`` equally
    spaced outcomes; the mean is weighted by the outcome density.

    :returns: ``{"probability", "min_fidelity", "mean_fidelity"}``
    """
    lo, hi = map(float, window)
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
        raise ValueError("window must be a finite interval")
    polys = _polys(params)
    gx, gw = np.polynomial.legendre.leggauss(64)
    nodes = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
    prob = 0.5 * (hi - lo) * float(gw @ p0_density(polys, t, k, alpha, nodes, x))
    ps = np.linspace(lo, hi, samples)
    res = [conditional_gkp(polys, t, k, alpha, p, x, target) for p in ps]
    fids = np.array([r.fidelity for r in res])
    dens = np.array([r.probability for r in res])
    return {
        "probability": prob,
        "min_fidelity": float(fids.min()),
        "mean_fidelity": float(np.sum(fids * dens) / np.sum(dens)),
    }


def solve_window(params, t, k, probability, alpha=None, center=0.0, x=None, one_sided: int = 0) -> float:
    """Half-width ``c`` whose window around ``center`` has the given acceptance probability.

    ``one_sided = +1`` uses ``[center, center + c]``, ``-1`` uses ``[center - c, center]``.
    """
    polys = _polys(params)
    gx, gw = np.polynomial.legendre.leggauss(64)

    def prob(c):
        lo = center if one_sided > 0 else center - c
        hi = center if one_sided < 0 else center + c
        nodes = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
        return 0.5 * (hi - lo) * float(gw @ p0_density(polys, t, k, alpha, nodes, x))

    hi = 1e-4
    while prob(hi) < probability:
        hi *= 2
        if hi > 50:
            raise ValueError("requested probability not reachable")
    return brentq(lambda c: prob(c) - probability, 0.0, hi, xtol=1e-12)


def magic_p0(k: float, d: float = SQRT_PI) -> float:
    """Meter outcome ``pi^2 / (8 k d)`` that imprints a quarter-pi phase on every second peak."""
    return float(np.pi**2 / (8 * k * d))


def magic_target(k: float, d: float = SQRT_PI) -> GkpSpec:
    """Comb with spacing ``d`` and phase ``exp(i pi/4)`` on odd peaks."""
    return GkpSpec(d, k, odd_phase=np.exp(1j * np.pi / 4))


def conditional_magic(params, k, x=None, p0=None, d: float = SQRT_PI) -> ConditionalResult:
    """Conditional magic-state generation with ``t = pi/d`` and outcome ``p0`` (default :func:`magic_p0`)."""
    t = np.pi / d
    p0 = magic_p0(k, d) if p0 is None else p0
    return conditional_gkp(params, t, k, None, p0, x, magic_target(k, d))


# ---------------------------------------------------------------- controlled-Z

_QUBIT_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))
CZ_SIGNS = np.array([1, 1, 1, -1])


@dataclass
class CzResult:
    """Output map of the approximate CZ gate and its worst-case fidelity.

    ``output`` has shape ``(4, n_grid, 4)``: input basis state, ancilla grid point,
    two-qubit output amplitude (basis ``|00>, |01>, |10>, |11>``).
    """

    output: np.ndarray
    dx: float
    worst_case: float
    argmin: tuple
    leakage: float

    def density(self, c) -> np.ndarray:
        """Two-qubit output density matrix (ancilla traced) for input amplitudes ``c``."""
        v = np.einsum("i,ixo->xo", np.asarray(c, complex), self.output)
        return np.einsum("xo,xp->op", v, v.conj()) * self.dx

    def fidelity(self, th1, ph1, th2, ph2):
        return cz_fidelity(self.output, self.dx, th1, ph1, th2, ph2)


def _check_tails(psi, axis, frac=0.05, tol=1e-8):
    w = np.abs(np.moveaxis(psi, axis, 0)) ** 2
    w = w.reshape(w.shape[0], -1).sum(axis=1)
    edge = max(1, int(frac * len(w)))
    tail = (w[:edge].sum() + w[-edge:].sum()) / w.sum()
    if tail > tol:
        raise AliasingError(f"grid edge carries relative weight {tail:.2e}")


def cz_output_map(polys, points: int = 2048, cutoff: int = 12, t: float = SQRT_PI, tail_tol: float | None = 1e-5):
    """Propagate the four two-qubit Fock inputs through the ancilla-mediated CZ circuit.

    The ancilla starts in vacuum. The sequence applies ``F_a^dag`` followed by
    ``M_j = exp(-i t x_a / 2) S^{(a,j)}(t)`` for ``j = 2, 1, 2, 1``; each ``S`` acts
    on the qubit mode through its Fock matrices at ``t x_a``.

    :returns: ``(output[4, points, 4], dx, leakage)``
    """
    polys = _polys(polys)
    x, dx = selfdual_grid(points)
    G = gaussian_fock_matrices(polys, t * x, cutoff) * np.exp(-0.5j * t * x)[:, None, None]
    out = np.zeros((4, points, 4), dtype=complex)
    leak = 0.0
    for idx, (i, j) in enumerate(_QUBIT_PAIRS):
        psi = np.zeros((points, cutoff + 1, cutoff + 1), dtype=complex)
        psi[:, i, j] = np.pi**-0.25 * np.exp(-(x**2) / 2)
        for mode in (2, 1, 2, 1):
            psi = fourier_dagger(psi, axis=0, dx=dx)
            if tail_tol is not None:
                _check_tails(psi, 0, tol=tail_tol)
            psi = apply_field(psi, G, axis=mode)
        out[idx] = psi[:, :2, :2].reshape(points, 4)
        leak = max(leak, 1 - float(np.sum(np.abs(out[idx]) ** 2) * dx))
    return out, dx, leak


def cz_fidelity(output, dx, th1, ph1, th2, ph2) -> np.ndarray:
    """``<chi|rho|chi>`` for product inputs on the two Bloch spheres, vectorized over angles."""
    th1, ph1, th2, ph2 = (np.atleast_1d(np.asarray(a, float)) for a in (th1, ph1, th2, ph2))
    a = np.stack([np.cos(th1 / 2), np.exp(1j * ph1) * np.sin(th1 / 2)])
    b = np.stack([np.cos(th2 / 2), np.exp(1j * ph2) * np.sin(th2 / 2)])
    c = np.einsum("in,jn->ijn", a, b).reshape(4, -1)
    tg = c * CZ_SIGNS[:, None]
    R = np.einsum("ixo,xjp->iojp", output, np.moveaxis(output, 0, 1).conj()).reshape(16, 16) * dx
    w = np.einsum("in,on->ion", c, tg.conj()).reshape(16, -1)
    return np.real(np.einsum("in,ij,jn->n", w, R, w.conj()))


def cz_worst_case(out, dx, coarse: int = 16, refine: int = 5, tol: float = 1e-6):
    """Minimum of :func:`cz_fidelity` over product inputs and its location.

    A ``coarse^4`` grid over ``(theta_1, phi_1, theta_2, phi_2)`` is scanned, then
    Nelder-Mead refines the ``refine`` lowest cells.
    """
    th = np.linspace(0, np.pi, coarse)
    ph = np.linspace(0, 2 * np.pi, coarse, endpoint=False)
    grid = np.array(np.meshgrid(th, ph, th, ph, indexing="ij")).reshape(4, -1)
    f = cz_fidelity(out, dx, *grid)
    best = np.argsort(f)[:refine]
    fmin, amin = float(f[best[0]]), tuple(grid[:, best[0]])
    for b in best:
        res = minimize(lambda z: cz_fidelity(out, dx, *z)[0], grid[:, b], method="Nelder-Mead",
                       options={"xatol": tol, "fatol": tol * 1e-3, "maxiter": 4000})
        if res.fun < fmin:
            fmin, amin = float(res.fun), tuple(res.x)
    return fmin, amin


def cz_gate(params, points: int = 2048, cutoff: int = 12, coarse: int = 16, refine: int = 5, tol: float = 1e-6) -> CzResult:
    """Worst-case fidelity of the approximate CZ gate over product inputs."""
    out, dx, leak = cz_output_map(params, points, cutoff)
    fmin, amin = cz_worst_case(out, dx, coarse, refine, tol)
    return CzResult(out, dx, fmin, amin, leak)


def cz_fock_oracle(params, t: float = SQRT_PI, cutoffs=(60, 60), strategy: str = "min_strength",
                   merge_correctives: bool = False, coarse: int = 16, refine: int = 5) -> CzResult:
    """Worst-case CZ fidelity from the compiled splitter and cubic-gate circuit run in a Fock basis.

    Independent of the quadrature polynomials: every controlled gate is realized
    by its exact cubic-gate decomposition and propagated on three truncated modes
    (ancilla cutoff ``cutoffs[0]``, qubit modes ``cutoffs[1]``). The ancilla is
    traced in its Fock basis.
    """
    from .decomp import compile_cz
    from .focksim import FockState, run_circuit

    circ = compile_cz(params, t, strategy, merge_correctives)
    na, nq = cutoffs
    out = np.zeros((4, na, 4), dtype=complex)
    leak = 0.0
    for idx, (i, j) in enumerate(_QUBIT_PAIRS):
        amps = np.zeros((na, nq, nq), dtype=complex)
        amps[0, i, j] = 1.0
        final = run_circuit(circ, FockState(amps)).state.amps
        out[idx] = final[:, :2, :2].reshape(na, 4)
        leak = max(leak, 1 - float(np.sum(np.abs(final) ** 2)))
    fmin, amin = cz_worst_case(out, 1.0, coarse, refine)
    return CzResult(out, 1.0, fmin, amin, leak)


# ---------------------------------------------------------------- qubit-mode pipelines


@dataclass
class QubitModeState:
    """Qumode grid wavefunction jointly with a dual-rail ancilla.

    ``amps[x, j]`` uses the two-mode Fock basis ``two_mode_basis(ntot)`` of the rails
    expressed in the sum/difference modes ``u, v = (a_2 +- a_3)/sqrt 2``.
    """

    x: np.ndarray
    amps: np.ndarray
    ntot: int

    @property
    def dx(self):
        return self.x[1] - self.x[0]

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2) * self.dx))

    def rails(self) -> np.ndarray:
        """Amplitudes in the rail basis ``|n_2, n_3>``."""
        C = beam_splitter_basis_change(self.ntot)
        return self.amps @ C.T

    def qubit_components(self) -> tuple[np.ndarray, np.ndarray]:
        """Mode wavefunctions attached to ``|0_L> = |1,0>`` and ``|1_L> = |0,1>``."""
        basis = two_mode_basis(self.ntot)
        r = self.rails()
        return r[:, basis.index((1, 0))], r[:, basis.index((0, 1))]

    @classmethod
    def from_qubit(cls, x, psi, qubit, ntot: int = 8):
        """``psi(x) (q0 |0_L> + q1 |1_L>)``."""
        basis = two_mode_basis(ntot)
        rail = np.zeros(len(basis), dtype=complex)
        rail[basis.index((1, 0))] = qubit[0]
        rail[basis.index((0, 1))] = qubit[1]
        C = beam_splitter_basis_change(ntot)
        uv = C.T @ rail
        return cls(np.asarray(x, float), np.outer(psi, uv), ntot)



def _triangle_index(ntot):
    basis = two_mode_basis(ntot)
    a = np.array([b[0] for b in basis])
    b = np.array([b[1] for b in basis])
    return a, b


def rabi_matrices(polys, s, ntot: int):
    """Fock matrices of the sum and difference modes for ``T`` at control values ``s``.

    ``T = S^{(1,u)}(t) S^{(1,v)}(-t)`` acts at control value ``s = t x_1`` as
    ``G(s)`` on ``u`` and ``G(-s)`` on ``v``.
    """
    polys = _polys(polys)
    s = np.asarray(s, float)
    return gaussian_fock_matrices(polys, s, ntot), gaussian_fock_matrices(polys, -s, ntot)


def _apply_rabi(state: QubitModeState, Gu, Gv) -> QubitModeState:
    a, b = _triangle_index(state.ntot)
    n = state.ntot + 1
    sq = np.zeros((len(state.x), n, n), dtype=complex)
    sq[:, a, b] = state.amps
    sq = apply_field(sq, Gu, axis=1)
    sq = apply_field(sq, Gv, axis=2)
    return QubitModeState(state.x, sq[:, a, b], state.ntot)


def _rail_phase(ntot, mode, quarter_turns):
    # exp(i pi/2 * quarter_turns * n_mode) expressed in the u, v basis
    C = beam_splitter_basis_change(ntot)
    basis = two_mode_basis(ntot)
    n = np.array([b[mode] for b in basis])
    return C.T @ np.diag(1j ** (quarter_turns * n)) @ C


def _rabi_gate(state, polys, strength, kind, cache=None):
    """Apply ``exp(i strength q sigma)`` for ``kind`` in ``{"x_sx", "p_sx", "x_sy"}`` via ``T``.

    ``x sigma_x`` is ``T`` itself; ``p sigma_x`` is ``F_1^dag T(-strength) F_1``;
    ``x sigma_y`` is ``F_3 T F_3^dag``.
    """
    if strength == 0:
        return state
    x, dx = state.x, state.dx
    t = -strength if kind == "p_sx" else strength
    key = (kind, float(t))
    if cache is not None and key in cache:
        Gu, Gv = cache[key]
    else:
        Gu, Gv = rabi_matrices(polys, t * x, state.ntot)
        if cache is not None:
            cache[key] = (Gu, Gv)
    amps = state.amps
    if kind == "p_sx":
        amps = fourier(amps, axis=0, dx=dx)
        _check_tails(amps, 0, tol=1e-7)
    elif kind == "x_sy":
        amps = amps @ _rail_phase(state.ntot, 1, -1).T
    out = _apply_rabi(QubitModeState(x, amps, state.ntot), Gu, Gv).amps
    if kind == "p_sx":
        out = fourier_dagger(out, axis=0, dx=dx)
    elif kind == "x_sy":
        out = out @ _rail_phase(state.ntot, 1, 1).T
    return QubitModeState(x, out, state.ntot)


def measurement_free_step(state: QubitModeState, u, v, w, params, cache=None) -> QubitModeState:
    """One round ``W V U`` with ``U = exp(i u x sigma_y)``, ``V = exp(i v p sigma_x)``, ``W = exp(i w x sigma_y)``."""
    polys = _polys(params)
    state = _rabi_gate(state, polys, u, "x_sy", cache)
    state = _rabi_gate(state, polys, v, "p_sx", cache)
    return _rabi_gate(state, polys, w, "x_sy", cache)


def measurement_free_schedule(N: int, u=None):
    """Displacements ``v_k``, disentanglers ``w_k`` and preparations ``u_k`` for ``N`` rounds.

    ``v_1 = -sqrt(pi) 2^{N-1}``, ``v_k = sqrt(pi) 2^{N-k}`` otherwise;
    ``w_k = -sqrt(pi)/4 2^{-(N-k)}`` for ``k < N`` and ``w_N = sqrt(pi)/4``.
    """
    v = [(-1 if k == 1 else 1) * SQRT_PI * 2.0 ** (N - k) for k in range(1, N + 1)]
    w = [(-SQRT_PI / 4 * 2.0 ** (-(N - k)) if k < N else SQRT_PI / 4) for k in range(1, N + 1)]
    u = [0.0] * N if u is None else [float(a) for a in u]
    if len(u) != N:
        raise ValueError("need one preparation strength per round")
    return v, w, u


def measurement_free_protocol(N, u, k, params, points: int = 4096, ntot: int = 16, target: GkpSpec | None = None):
    """Deterministic comb generation from squeezed vacuum and a dual-rail ancilla in ``|0_L>``.

    Each ``W_k`` is merged with the following ``U_{k+1}`` so ``2N`` Rabi-type gates
    act (``u_1`` is applied separately when nonzero). The ancilla is traced out.

    :returns: dict with the joint state, the reduced mode density along the grid
        diagonal, the traced fidelity to ``target`` (default ``|1>`` comb) and the
        ancilla population left outside ``|0_L>``
    """
    polys = _polys(params)
    v, w, u = measurement_free_schedule(N, u)
    x, dx = selfdual_grid(points)
    psi0 = (k**2 / np.pi) ** 0.25 * np.exp(-(k**2) * x**2 / 2)
    state = QubitModeState.from_qubit(x, psi0, (1.0, 0.0), ntot)
    cache = {}
    state = _rabi_gate(state, polys, u[0], "x_sy", cache)
    for j in range(N):
        state = _rabi_gate(state, polys, v[j], "p_sx", cache)
        nxt = u[j + 1] if j + 1 < N else 0.0
        state = _rabi_gate(state, polys, w[j] + nxt, "x_sy", cache)
    target = GkpSpec(2 * SQRT_PI, k, delta=np.pi / 2) if target is None else target
    tg = gaussian_gkp(target, x).amps
    tg = tg / np.sqrt(np.sum(np.abs(tg) ** 2) * dx)
    ov = (tg.conj() @ state.amps) * dx
    norm2 = state.norm() ** 2
    fid = float(np.sum(np.abs(ov) ** 2) / norm2)
    c0, c1 = state.qubit_components()
    p0 = float(np.sum(np.abs(c0) ** 2) * dx)
    return {
        "state": state,
        "marginal": np.sum(np.abs(state.amps) ** 2, axis=1),
        "fidelity": fid,
        "norm": norm2,
        "ancilla_excited": 1 - p0 / norm2,
    }


def _resample(psi: GridWavefunction, x):
    if len(psi.x) == len(x) and np.allclose(psi.x, x):
        return psi.amps
    return np.interp(x, psi.x, psi.amps.real, 0, 0) + 1j * np.interp(x, psi.x, psi.amps.imag, 0, 0)


def _onto_grid(psi: GridWavefunction, x, frac: float = 0.8):
    """Normalized input on ``x``; a finer input is low-passed to the band of ``x`` before sampling.

    Point sampling a finer wavefunction would alias its high momenta into the band.
    :returns: ``(amps, lost)`` where ``lost`` is the weight outside the band
    """
    from scipy.interpolate import CubicSpline

    dx = x[1] - x[0]
    xf = psi.x
    amps = psi.amps / psi.norm()
    dxf = xf[1] - xf[0]
    if dxf >= dx or (len(xf) == len(x) and np.allclose(xf, x)):
        out = _resample(GridWavefunction((xf,), amps), x)
        return out / np.sqrt(np.sum(np.abs(out) ** 2) * dx), 0.0
    spec = np.fft.fft(amps)
    spec[np.abs(2 * np.pi * np.fft.fftfreq(len(xf), dxf)) > frac * np.pi / dx] = 0
    low = np.fft.ifft(spec)
    lost = float(1 - np.trapezoid(np.abs(low) ** 2, xf))
    inside = (x >= xf[0]) & (x <= xf[-1])
    out = np.zeros(len(x), dtype=complex)
    out[inside] = CubicSpline(xf, low.real)(x[inside]) + 1j * CubicSpline(xf, low.imag)(x[inside])
    return out, lost


def _band_limit(psi, x, frac: float = 0.8):
    """Drop momenta beyond ``frac`` of the grid's Nyquist range; returns the filtered state and lost weight."""
    dx = x[1] - x[0]
    spec = fourier(psi, dx=dx)
    keep = np.abs(momentum_grid(x)) <= frac * np.pi / dx
    before = np.sum(np.abs(psi) ** 2) * dx
    out = fourier_dagger(np.where(keep, spec, 0), dx=dx)
    return out, float(1 - np.sum(np.abs(out) ** 2) * dx / before)


def _logical_outputs(x, amps_measured, amps_all, k, qubit, total=None):
    dx = x[1] - x[0]
    target = GkpSpec(2 * SQRT_PI, k, weights=tuple(qubit), shift=SQRT_PI)
    tg = gaussian_gkp(target, x).amps
    tg = tg / np.sqrt(np.sum(np.abs(tg) ** 2) * dx)
    if total is None:
        total = np.sum(np.abs(amps_all) ** 2) * dx
    traced = float(np.sum(np.abs(tg.conj() @ amps_all * dx) ** 2) / total)
    pm = float(np.sum(np.abs(amps_measured) ** 2) * dx)
    measured = float(abs(np.sum(tg.conj() * amps_measured) * dx) ** 2 / pm)
    return {"traced_fidelity": traced, "measured_fidelity": measured, "success_probability": pm / total}


def logical_state_prep(psi_in: GridWavefunction, qubit, params, k, points: int = 4096, ntot: int = 8, t: float = SQRT_PI / 2):
    """Arbitrary logical state from an alternating-sign comb and a dual-rail ancilla.

    The ancilla starts in ``a |+> + b |->`` with ``|+-> = (|0_L> +- |1_L>)/sqrt 2``.
    The sequence ``exp(i t p) F_3 T(t) F_3^dag F_1^dag T(t) F_1`` with ``t = sqrt(pi)/2``
    is applied; the target is ``a |0> + b exp(i sqrt(pi) p)|0>`` with the comb
    squeezing ``k``. Both the ancilla-traced fidelity and the fidelity after
    finding the ancilla in ``|0_L>`` (with its probability) are reported.

    Momentum content the grid cannot resolve is removed from the input first (a
    finer input grid is low-passed before sampling) and reported as ``unresolved``; it counts as lost, as does weight leaving the
    ancilla truncation ``ntot``, so both lower the fidelity and success figures.
    """
    polys = _polys(params)
    a, b = qubit
    x, dx = selfdual_grid(points)
    psi, lost = _onto_grid(psi_in, x)
    psi, unresolved = _band_limit(psi, x)
    unresolved = 1 - (1 - lost) * (1 - unresolved)
    q = ((a + b) / np.sqrt(2), (a - b) / np.sqrt(2))
    state = QubitModeState.from_qubit(x, psi, q, ntot)
    state = _rabi_gate(state, polys, -t, "p_sx")
    state = _rabi_gate(state, polys, t, "x_sy")
    amps = displace_x(state.amps, x, -t, axis=0)
    state = QubitModeState(x, amps, ntot)
    c0, _ = state.qubit_components()
    out = _logical_outputs(x, c0, state.amps, k, qubit, total=1.0)
    out["unresolved"] = unresolved
    out["state"] = state
    return out


def ideal_logical_state_prep(psi_in: GridWavefunction, qubit, k, points: int = 2048, t: float = SQRT_PI / 2):
    """Reference for :func:`logical_state_prep` with exact Rabi-type gates on a two-level ancilla."""
    a, b = qubit
    x, dx = selfdual_grid(points)
    psi, _ = _onto_grid(psi_in, x)
    # sigma_x eigenbasis: exp(-i t p sigma_x) moves |+> by +t and |-> by -t
    plus = displace_x(a * psi, x, t)
    minus = displace_x(b * psi, x, -t)
    c0 = (plus + minus) / np.sqrt(2)
    c1 = (plus - minus) / np.sqrt(2)
    # exp(i t x sigma_y) in the computational basis
    cs, sn = np.cos(t * x), np.sin(t * x)
    c0, c1 = cs * c0 + sn * c1, -sn * c0 + cs * c1
    c0 = displace_x(c0, x, -t)
    c1 = displace_x(c1, x, -t)
    out = _logical_outputs(x, c0, np.stack([c0, c1], axis=1), k, qubit)
    return out


# ---------------------------------------------------------------- photon loss


LOSS_POSITIONS = ("LC1", "LC2", "LC3", "LC4")
SQUARE_L3 = (0.6794, 0.4543, 0.3353, 0.0)


@dataclass
class LossResult:
    eta: float
    channels: tuple
    fidelity: float
    probability: float
    branches: int
    pruned: float
    psi_branches: list = field(default_factory=list, repr=False)


def _loss_channels(active, n_positions):
    names = tuple(f"LC{j}" for j in range(1, n_positions + 1))
    if active is None or active == "all":
        return tuple((p, m) for p in names for m in (1, 2))
    if active in ("none", ()):
        return ()
    if isinstance(active, str):
        active = [a.strip() for a in active.split(",") if a.strip()]
    out = []
    for a in active:
        pos, modes = (a, (1, 2)) if isinstance(a, str) else (a[0], (int(a[1]),))
        if pos not in names:
            raise ValueError(f"unknown loss position {pos!r}; choose from {names}")
        if any(m not in (1, 2) for m in modes):
            raise ValueError("loss channels act on mode 1 or 2")
        out += [(pos, m) for m in modes]
    return tuple(sorted(set(out)))


def loss_study(eta: float, active="all", params=SQUARE_L3, t: float = SQRT_PI / 2, k: float | None = None,
               p0: float = 0.0, points=(256, 2048), window: float = 6.0, tol: float = 1e-8,
               keep_branches: bool = False) -> LossResult:
    """Conditional GKP generation with photon loss before and between the controlled gates.

    Loss positions: ``LC1`` acts after the squeezed and displaced inputs, ``LC{j+1}``
    after the ``j``-th active gate of the sequence; every position carries one channel
    per mode. A channel of reflectivity ``eta`` has Kraus operators
    ``eta^n / sqrt(n!) tau^N a^n`` with ``tau = sqrt(1 - eta^2)``.

    Both modes live on position grids (``points = (n1, n2)``); the meter grid is
    self-dual so its Kraus operators act spectrally. Mode 1 is restricted by a smooth
    window at ``|x1| = window``, beyond which the approximate gates squeeze the meter
    past the grid while the conditional amplitude is negligible. Kraus branches are
    followed depth-first and dropped once their relative weight falls below ``tol``.

    :returns: fidelity of the ancilla-conditioned mixed state (after the momentum
        correction) to the square comb, and the density of ``p0``
    """
    from scipy.special import erf

    if not 0.0 <= eta <= 0.1:
        raise ValueError("eta must lie in [0, 0.1]")
    pv = params if isinstance(params, ParamVector) else ParamVector(np.asarray(params, float))
    k = float(np.sqrt(21 * np.pi / 4)) if k is None else float(k)
    alpha = k / t
    gates = [(kind, v) for lam, mu in pv.pairs() for kind, v in (("p", mu), ("x", lam)) if v != 0]
    channels = _loss_channels(active, len(gates) + 1)
    ops = []

    def add_loss(pos):
        ops.extend(("loss", m) for (p, m) in channels if p == pos)

    add_loss("LC1")
    for j, g in enumerate(gates, start=2):
        ops.append(g)
        add_loss(f"LC{j}")

    n1, n2 = points
    x1 = centered_grid(n1, 2 * (window + 1.5) / n1)
    dx1 = x1[1] - x1[0]
    x2, dx2 = selfdual_grid(n2)
    p2 = momentum_grid(x2)
    psi1 = (np.pi * k**2) ** -0.25 * np.exp(-(x1**2) / (2 * k**2)) * 0.5 * (1 - erf((np.abs(x1) - window) / 0.3))
    meter = np.pi**-0.25 * np.exp(-((x2 - alpha) ** 2) / 2)
    s = t * x1[:, None]
    axes = {1: (0, x1), 2: (1, x2)}
    tau = np.sqrt(1 - eta**2)
    gamma = -np.log(tau) if eta > 0 else 0.0
    proj = np.exp(-1j * p0 * x2) * dx2 / np.sqrt(2 * np.pi)
    kick = np.exp(-1j * k**2 * x1 / (2 * t))

    outs = []
    pruned = [0.0]

    def run(st, i, w):
        if i == len(ops):
            outs.append((st @ proj) * kick)
            return
        kind, v = ops[i]
        if kind == "p":
            return run(fourier_dagger(fourier(st, 1, dx2) * np.exp(0.5j * v * s * p2**2), 1, dx2), i + 1, w)
        if kind == "x":
            return run(st * np.exp(0.5j * v * s * x2**2), i + 1, w)
        ax, grid = axes[v]
        if eta == 0:
            return run(st, i + 1, w)
        base = np.sum(np.abs(st) ** 2)
        cur, n = st, 0
        left = 1.0
        while True:
            br = number_damping(cur, grid, gamma, axis=ax) * (eta**n / np.sqrt(float(factorial(n))))
            wb = np.sum(np.abs(br) ** 2) / base
            if n > 0 and wb * w < tol:
                pruned[0] += max(left, 0.0) * w
                break
            left -= wb
            run(br, i + 1, wb * w)
            n += 1
            cur = lower(cur, grid, axis=ax)

    run(psi1[:, None] * meter[None, :], 0, 1.0)

    # target on a grid wide enough for its envelope, sharing the mode-1 spacing
    half = int(np.ceil((2 * k + 3 / k + 6) / dx1))
    xt = centered_grid(2 * half, dx1)
    tg = gaussian_gkp(GkpSpec(np.pi / t, k), xt).amps
    tg = tg / np.sqrt(np.sum(np.abs(tg) ** 2) * dx1)
    i0 = half - n1 // 2
    ov = sum(abs(np.sum(tg[i0:i0 + n1].conj() * a) * dx1) ** 2 for a in outs)
    dens = sum(np.sum(np.abs(a) ** 2) * dx1 for a in outs)
    return LossResult(float(eta), channels, float(ov / dens), float(dens), len(outs), float(pruned[0]),
                      outs if keep_branches else [])
