"""Truncated Fock-basis simulator for circuits of the gate set in :mod:`cvforge.decomp`.

States are amplitude tensors of shape ``cutoffs + 1`` per mode (pure) or
``(dims..., dims...)`` (mixed, ket indices first). Gate matrices are built by
exponentiating generators in a padded space and truncating, so population pushed
past the cutoff shows up as a norm drop that is monitored per gate.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln, eval_genlaguerre

from .decomp import CircuitIR, Gate
from .gridsim import hermite_functions

__all__ = [
    "TruncationWarning",
    "TruncationError",
    "FockState",
    "FockDensity",
    "annihilation",
    "gate_matrix",
    "apply_gate",
    "run_circuit",
    "loss_kraus",
    "loss_channel",
    "homodyne_condition",
    "fidelity",
    "reduced_density",
    "wigner",
    "to_position_wavefunction",
    "coherent_state",
    "fock_state",
    "squeezed_vacuum",
]

WARN_LEAK = 1e-4
FAIL_LEAK = 1e-2


class TruncationWarning(UserWarning):
    pass


class TruncationError(RuntimeError):
    pass


@dataclass
class FockState:
    """Pure state; ``amps`` has one axis per mode."""

    amps: np.ndarray

    @property
    def dims(self):
        return self.amps.shape

    @property
    def arity(self):
        return self.amps.ndim

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def to_density(self) -> "FockDensity":
        a = self.amps
        return FockDensity(np.multiply.outer(a, a.conj()))

    def to_json(self) -> str:
        return json.dumps({
            "kind": "pure",
            "dims": list(self.dims),
            "amps": [[float(z.real), float(z.imag)] for z in self.amps.ravel()],
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        a = np.array([complex(re, im) for re, im in d["amps"]]).reshape(d["dims"])
        return cls(a)


@dataclass
class FockDensity:
    """Mixed state; ``rho`` has shape ``dims + dims``."""

    rho: np.ndarray

    @property
    def arity(self):
        return self.rho.ndim // 2

    @property
    def dims(self):
        return self.rho.shape[: self.arity]

    def matrix(self):
        d = int(np.prod(self.dims))
        return self.rho.reshape(d, d)

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix())))

    def norm(self) -> float:
        return self.trace()

    def to_json(self) -> str:
        return json.dumps({
            "kind": "mixed",
            "dims": list(self.dims),
            "rho": [[float(z.real), float(z.imag)] for z in self.rho.ravel()],
        })


def annihilation(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def _quads(n):
    a = annihilation(n)
    x = (a + a.T) / np.sqrt(2)
    p = (a - a.T) / (1j * np.sqrt(2))
    return a, x, p


def _quadrature_grid(n, spread=1.0, slope=0.0):
    # trapezoid rule on a wide uniform grid is spectrally accurate for Hermite-function
    # integrands; ``slope`` bounds the phase gradient that the step must resolve
    ext = spread * (np.sqrt(2 * n + 1) + 9.0)
    dx = min(0.02, 0.5 / (1.0 + slope))
    pts = int(np.ceil(2 * ext / dx)) | 1
    return np.linspace(-ext, ext, pts)


@lru_cache(maxsize=512)
def _single_mode_matrix(kind: str, params: tuple, n: int) -> np.ndarray:
    """Exact truncated matrix ``<m|U|n>``, ``m, n < n``.

    Cubic, squeeze and displacement gates are evaluated as position-space overlaps
    ``int h_m(x) (U h_n)(x) dx``; this gives the matrix elements of the untruncated
    unitary rather than the exponential of a truncated generator.
    """
    if kind == "rotate":
        return np.diag(np.exp(1j * params[0] * np.arange(n)))
    if kind == "squeeze":
        k = np.exp(-params[0])
        x = _quadrature_grid(n, max(k, 1.0))
        dx = x[1] - x[0]
        h = hermite_functions(n - 1, x)
        hk = hermite_functions(n - 1, x / k) / np.sqrt(k)
        return (h @ hk.T) * dx
    if kind == "cubic":
        ext = np.sqrt(2 * n + 1) + 9.0
        x = _quadrature_grid(n, slope=3 * abs(params[0]) * ext**2)
        dx = x[1] - x[0]
        h = hermite_functions(n - 1, x)
        return (h * np.exp(1j * params[0] * x**3)) @ h.T * dx
    if kind == "displace":
        al = complex(params[0], params[1] if len(params) > 1 else 0.0)
        x0, p0 = np.sqrt(2) * al.real, np.sqrt(2) * al.imag
        x = _quadrature_grid(n) + x0 / 2
        x = np.linspace(x[0] - abs(x0) / 2, x[-1] + abs(x0) / 2, len(x) + int(abs(x0) / 0.02))
        dx = x[1] - x[0]
        h = hermite_functions(n - 1, x)
        hs = hermite_functions(n - 1, x - x0)
        phase = np.exp(1j * p0 * x - 0.5j * x0 * p0)
        return h @ (phase * hs).T * dx
    raise ValueError(kind)


@lru_cache(maxsize=4096)
def _bs_block(s: float, tot: int) -> np.ndarray:
    # generator on the fixed-total block, basis index = photons in the first mode
    j = np.arange(1, tot + 1)
    gen = np.zeros((tot + 1, tot + 1))
    gen[j - 1, j] = np.sqrt(j * (tot - j + 1.0))
    return expm(s * (gen - gen.T))


def _bs_blocks(s, n1, n2):
    """Yield ``(first-mode indices, second-mode indices, block)`` per total photon number."""
    for tot in range(n1 + n2 - 1):
        j = np.arange(max(0, tot - n2 + 1), min(tot, n1 - 1) + 1)
        yield j, tot - j, _bs_block(s, tot)[np.ix_(j, j)]


def _beam_splitter_matrix(s: float, n1: int, n2: int) -> np.ndarray:
    """``exp(s (a_k a_l^dag - a_k^dag a_l))`` truncated to ``n1 x n2`` levels.

    The generator conserves the total photon number, so it is exponentiated per
    fixed-total block.
    """
    U = np.zeros((n1, n2, n1, n2), dtype=complex)
    for a, b, blk in _bs_blocks(s, n1, n2):
        U[a[:, None], b[:, None], a[None, :], b[None, :]] = blk
    return U.reshape(n1 * n2, n1 * n2)


def _apply_bs(amps, s, k, l, conj=False):
    moved = np.moveaxis(amps, (k, l), (0, 1))
    out = np.zeros_like(moved)
    n1, n2 = moved.shape[:2]
    for a, b, blk in _bs_blocks(s, n1, n2):
        out[a, b] = np.tensordot(blk.conj() if conj else blk, moved[a, b], axes=(1, 0))
    return np.moveaxis(out, (0, 1), (k, l))


def gate_matrix(gate: Gate, dims) -> np.ndarray:
    """Truncated matrix of ``gate`` on its modes (two-mode matrices use row-major ``(k, l)``)."""
    if gate.kind == "beamsplitter":
        k, l = gate.modes
        return _beam_splitter_matrix(float(gate.params[0]), dims[k], dims[l])
    (m,) = gate.modes
    return _single_mode_matrix(gate.kind, tuple(float(v) for v in gate.params), dims[m])


def _apply_op(amps, U, modes):
    """Contract ``U`` (on ``modes``) into the leading axes of ``amps``."""
    nd = amps.ndim
    rest = [i for i in range(nd) if i not in modes]
    perm = list(modes) + rest
    moved = np.transpose(amps, perm)
    shp = moved.shape
    k = int(np.prod([shp[i] for i in range(len(modes))]))
    out = (U @ moved.reshape(k, -1)).reshape(shp)
    return np.transpose(out, np.argsort(perm))


def _apply_unitary(state, U, modes):
    if isinstance(state, FockState):
        return FockState(_apply_op(state.amps, U, modes))
    n = state.arity
    rho = _apply_op(state.rho, U, modes)
    rho = _apply_op(rho, U.conj(), [m + n for m in modes])
    return FockDensity(rho)


def _check_leak(before, after, gate):
    drop = before - after
    if drop > FAIL_LEAK:
        raise TruncationError(f"{gate.kind} on {gate.modes}: norm dropped by {drop:.3g}")
    if drop > WARN_LEAK:
        warnings.warn(f"{gate.kind} on {gate.modes}: norm dropped by {drop:.3g}", TruncationWarning)


def apply_gate(state, gate: Gate):
    """Apply a unitary gate; markers are handled by :func:`run_circuit`."""
    if gate.kind in ("loss", "homodyne"):
        raise ValueError("markers are applied through run_circuit")
    if any(m >= state.arity for m in gate.modes):
        raise ValueError("gate mode outside state arity")
    before = _norm2(state)
    if gate.kind == "beamsplitter":
        s = float(gate.params[0])
        k, l = gate.modes
        if isinstance(state, FockState):
            out = FockState(_apply_bs(state.amps, s, k, l))
        else:
            n = state.arity
            rho = _apply_bs(state.rho, s, k, l)
            out = FockDensity(_apply_bs(rho, s, k + n, l + n, conj=True))
    else:
        out = _apply_unitary(state, gate_matrix(gate, state.dims), list(gate.modes))
    _check_leak(before, _norm2(out), gate)
    return out


def _norm2(state):
    if isinstance(state, FockState):
        return float(np.sum(np.abs(state.amps) ** 2))
    return state.trace()


@dataclass
class RunRecord:
    index: int
    kind: str
    mode: int
    value: float = 0.0
    probability: float = 1.0


@dataclass
class RunResult:
    state: object
    records: list = field(default_factory=list)


def run_circuit(circuit: CircuitIR, state):
    """Apply all gates in order; loss markers switch to a density representation."""
    if circuit.arity != state.arity:
        raise ValueError("circuit and state arity differ")
    records = []
    for i, g in enumerate(circuit.gates):
        if g.kind == "loss":
            if isinstance(state, FockState):
                state = state.to_density()
            state = loss_channel(state, g.modes[0], float(g.params[0]))
            records.append(RunRecord(i, "loss", g.modes[0], float(g.params[0])))
        elif g.kind == "homodyne":
            quad = g.params[0] if g.params else "p"
            value = float(g.params[1]) if len(g.params) > 1 else 0.0
            window = float(g.params[2]) if len(g.params) > 2 else 0.0
            state, prob = homodyne_condition(state, g.modes[0], quad, value, window)
            records.append(RunRecord(i, "homodyne", g.modes[0], value, prob))
        else:
            state = apply_gate(state, g)
    return RunResult(state, records)


def loss_kraus(eta: float, n: int) -> list[np.ndarray]:
    """Kraus operators ``A_k = sum_n sqrt(C(n,k)) tau^(n-k) eta^k |n-k><n|`` of amplitude loss."""
    if not 0 <= eta < 1:
        raise ValueError("reflectivity must lie in [0, 1)")
    tau = np.sqrt(1 - eta**2)
    ops = []
    lg = gammaln(np.arange(n + 1) + 1)
    for k in range(n):
        A = np.zeros((n, n))
        for m in range(k, n):
            logc = 0.5 * (lg[m] - lg[k] - lg[m - k])
            A[m - k, m] = np.exp(logc) * tau ** (m - k) * eta**k if eta > 0 or k == 0 else 0.0
        ops.append(A)
        if eta == 0:
            break
    return ops


def loss_channel(state, mode: int, eta: float) -> FockDensity:
    """Amplitude loss with reflectivity ``eta`` (loss probability ``eta^2``) on ``mode``."""
    if isinstance(state, FockState):
        state = state.to_density()
    n = state.dims[mode]
    out = np.zeros_like(state.rho)
    for A in loss_kraus(eta, n):
        out += _apply_unitary(state, A, [mode]).rho
    return FockDensity(out)


def _quad_eigenfunctions(n, q, quad):
    h = hermite_functions(n - 1, q)
    if quad == "x":
        return h.astype(complex)
    if quad == "p":
        return ((-1j) ** np.arange(n))[:, None] * h
    raise ValueError(f"unknown quadrature {quad!r}")


def homodyne_condition(state, mode: int, quad: str = "p", value: float = 0.0, window: float = 0.0):
    """Condition ``mode`` on a quadrature outcome in ``[value - window, value + window]``.

    ``window = 0`` projects onto the eigenstate at ``value``; the returned probability
    is then a density. Wider windows integrate the projector with 64-point
    Gauss-Legendre quadrature and return a mixed state.

    :returns: ``(normalized state on remaining modes, probability)``
    """
    if window < 0:
        raise ValueError("window must be non-negative")
    n = state.dims[mode]
    if window == 0:
        nodes, weights = np.array([value]), np.array([1.0])
    else:
        gx, gw = np.polynomial.legendre.leggauss(64)
        nodes = value + window * gx
        weights = window * gw
    # <q|n> for each node, shape (nodes, n)
    bra = _quad_eigenfunctions(n, nodes, quad).T
    if isinstance(state, FockState) and window == 0:
        amps = np.moveaxis(state.amps, mode, 0)
        cond = np.tensordot(bra[0], amps, axes=(0, 0))
        prob = float(np.sum(np.abs(cond) ** 2))
        if prob <= 0:
            raise ValueError("zero-probability outcome")
        return FockState(cond / np.sqrt(prob)), prob
    if isinstance(state, FockState):
        state = state.to_density()
    ar = state.arity
    rho = np.moveaxis(state.rho, [mode, mode + ar], [0, ar])
    out = 0
    for b, w in zip(bra, weights):
        tmp = np.tensordot(b, rho, axes=(0, 0))
        tmp = np.tensordot(b.conj(), tmp, axes=(0, ar - 1))
        out = out + w * tmp
    prob = float(np.real(np.trace(out.reshape(int(np.sqrt(out.size)), -1)))) if out.ndim else float(np.real(out))
    if prob <= 0:
        raise ValueError("zero-probability window")
    return FockDensity(out / prob), prob


def fidelity(state, target: FockState) -> float:
    """``<chi|rho|chi>`` for mixed input, ``|<chi|psi>|^2`` for pure input."""
    chi = target.amps
    if isinstance(state, FockState):
        if state.amps.shape != chi.shape:
            raise ValueError("shape mismatch")
        return float(np.abs(np.vdot(chi, state.amps)) ** 2)
    if state.dims != chi.shape:
        raise ValueError("shape mismatch")
    c = chi.ravel()
    return float(np.real(c.conj() @ state.matrix() @ c))


def reduced_density(state, mode: int) -> np.ndarray:
    """Single-mode density matrix of ``mode``."""
    if isinstance(state, FockState):
        a = np.moveaxis(state.amps, mode, 0).reshape(state.dims[mode], -1)
        return a @ a.conj().T
    ar = state.arity
    rho = state.rho
    keep = mode
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = [letters[i] for i in range(ar)]
    bra = [letters[i] for i in range(ar)]
    bra[keep] = letters[ar + keep]
    spec = "".join(ket + bra) + "->" + ket[keep] + bra[keep]
    return np.einsum(spec, rho)


def wigner(rho, x, p) -> np.ndarray:
    """Wigner function of a single-mode density matrix on the grid ``x`` by ``p``.

    ``W(x, p) = pi^{-1} int <x+y|rho|x-y> e^{2ipy} dy``, evaluated from the
    Laguerre form of the Fock-basis Wigner functions. Returns shape ``(len(x), len(p))``.
    """
    if isinstance(rho, FockState):
        rho = reduced_density(rho, 0)
    elif isinstance(rho, FockDensity):
        rho = reduced_density(rho, 0)
    rho = np.asarray(rho)
    n = rho.shape[0]
    X, Pm = np.meshgrid(np.asarray(x, float), np.asarray(p, float), indexing="ij")
    alpha = (X + 1j * Pm) / np.sqrt(2)
    r2 = 4 * np.abs(alpha) ** 2
    env = np.exp(-2 * np.abs(alpha) ** 2) / np.pi
    lg = gammaln(np.arange(n) + 1)
    W = np.zeros(X.shape)
    for m in range(n):
        for k in range(m, n):
            if rho[m, k] == 0 and rho[k, m] == 0:
                continue
            d = k - m
            # matrix element of |m><k| (k >= m) and its conjugate partner
            base = (-1) ** m * np.exp(0.5 * (lg[m] - lg[k])) * eval_genlaguerre(m, d, r2) * env
            term = base * (2 * np.conj(alpha)) ** d
            if d == 0:
                W += np.real(rho[m, m]) * base
            else:
                W += 2 * np.real(rho[k, m] * term)
    return W


def to_position_wavefunction(state: FockState, x, mode: int = 0) -> np.ndarray:
    """``psi(x) = sum_n c_n h_n(x)`` for a single-mode (or selected-mode) pure state."""
    amps = state.amps if state.arity == 1 else np.moveaxis(state.amps, mode, -1)
    n = amps.shape[-1]
    h = hermite_functions(n - 1, x)
    return amps @ h


def fock_state(n: int, cutoff: int) -> FockState:
    a = np.zeros(cutoff + 1, dtype=complex)
    a[n] = 1.0
    return FockState(a)


def coherent_state(beta: complex, cutoff: int) -> FockState:
    k = np.arange(cutoff + 1)
    logc = -0.5 * abs(beta) ** 2 - 0.5 * gammaln(k + 1)
    with np.errstate(divide="ignore"):
        amps = np.exp(logc) * np.where(k == 0, 1.0, beta ** k)
    return FockState(amps.astype(complex))


def squeezed_vacuum(xi: float, cutoff: int) -> FockState:
    """``exp((xi a^2 - xi a^dag^2)/2)|0>`` for real ``xi``."""
    out = np.zeros(cutoff + 1, dtype=complex)
    t = np.tanh(xi)
    out[0] = 1 / np.sqrt(np.cosh(xi))
    for n in range(2, cutoff + 1, 2):
        out[n] = out[n - 2] * (-t) * np.sqrt((n - 1) / n)
    return FockState(out)


def tensor(*states: FockState) -> FockState:
    out = states[0].amps
    for s in states[1:]:
        out = np.multiply.outer(out, s.amps)
    return FockState(out)
