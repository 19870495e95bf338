"""Exact decompositions of cubic multi-mode gates and compilation of Trotter sequences.

Gate conventions (operators, ``hbar = 1``):

* ``squeeze(xi)``: ``exp((xi a^2 - xi a^dag^2) / 2)``; ``xi < 0`` widens the position wavefunction
  to width ``k = exp(-xi)``.
* ``displace(re, im)``: ``exp(alpha a^dag - alpha^* a)`` with ``alpha = re + i im``.
* ``rotate(theta)``: ``exp(i theta n)``; the Fourier gate is ``theta = pi/2``.
* ``beamsplitter(s)`` on modes ``(k, l)``: ``exp(i s (p_k x_l - x_k p_l))``, mapping
  ``x_k -> cos s x_k + sin s x_l``.
* ``cubic(r)``: ``exp(i r x^3)``.
* ``loss(eta)``: amplitude-reflectivity loss marker; ``homodyne(quad, value, window)``.

Circuits list gates in application order (first element acts first).
"""
from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .polycore import ParamVector

__all__ = [
    "Gate",
    "CircuitIR",
    "S_MIN",
    "qnd_strengths",
    "strength_for_angle",
    "decompose_cubic_qnd",
    "decompose_cv_toffoli",
    "compile_S",
    "compile_T",
    "compile_cz",
    "equal_strength_plan",
    "gate_census",
    "cubic_strengths",
]

KINDS = ("squeeze", "displace", "rotate", "beamsplitter", "cubic", "loss", "homodyne")
S_MIN = float(np.arccos(1 / np.sqrt(3)))


@dataclass(frozen=True)
class Gate:
    kind: str
    modes: tuple
    params: tuple = ()
    tag: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        modes = tuple(int(m) for m in self.modes)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "params", tuple(self.params))
        want = 2 if self.kind == "beamsplitter" else 1
        if len(modes) != want:
            raise ValueError(f"{self.kind} acts on {want} mode(s), got {modes}")
        if self.kind == "beamsplitter" and modes[0] == modes[1]:
            raise ValueError("beam splitter needs two distinct modes")

    def to_dict(self):
        d = {"kind": self.kind, "modes": list(self.modes), "params": list(self.params)}
        if self.tag:
            d["tag"] = self.tag
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], tuple(d["modes"]), tuple(d.get("params", ())), d.get("tag", ""))


@dataclass
class CircuitIR:
    arity: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        ended = set()
        for g in self.gates:
            for m in g.modes:
                if not 0 <= m < self.arity:
                    raise ValueError(f"mode {m} outside arity {self.arity}")
                if m in ended:
                    raise ValueError(f"gate {g.kind} after homodyne marker on mode {m}")
            if g.kind == "homodyne":
                ended.add(g.modes[0])

    def append(self, gate: Gate):
        CircuitIR(self.arity, self.gates + [gate])
        self.gates.append(gate)

    def extend(self, other: "CircuitIR"):
        if other.arity > self.arity:
            raise ValueError("cannot extend with a wider circuit")
        CircuitIR(self.arity, self.gates + list(other.gates))
        self.gates.extend(other.gates)

    def __len__(self):
        return len(self.gates)

    def to_json(self, **kw) -> str:
        return json.dumps({"arity": self.arity, "gates": [g.to_dict() for g in self.gates]}, **kw)

    @classmethod
    def from_json(cls, text: str) -> "CircuitIR":
        d = json.loads(text)
        return cls(int(d["arity"]), [Gate.from_dict(g) for g in d["gates"]])


def qnd_strengths(alpha: float, s: float) -> tuple[float, float]:
    """Cubic strengths ``(r, beta)`` realizing ``exp(i alpha x_i x_j^2)`` at splitter angle ``s``."""
    c, sn = np.cos(s), np.sin(s)
    if abs(c * sn) < 1e-12:
        raise ValueError(f"splitter angle {s} cannot reach a nonzero QND strength")
    r = alpha / (6 * c * sn**2)
    return float(r), float(2 * r * c**3)


def strength_for_angle(alpha: float, s: float = S_MIN) -> float:
    return qnd_strengths(alpha, s)[0]


def _qnd_block(alpha, i, j, s, tag=""):
    r, beta = qnd_strengths(alpha, s)
    body = [
        Gate("beamsplitter", (i, j), (s,), tag),
        Gate("cubic", (i,), (r,), tag),
        Gate("beamsplitter", (i, j), (-2 * s,), tag),
        Gate("cubic", (i,), (r,), tag),
        Gate("beamsplitter", (i, j), (s,), tag),
    ]
    return body, Gate("cubic", (i,), (-beta,), "corrective")


def decompose_cubic_qnd(alpha: float, modes=(0, 1), strategy="min_strength", s=None, arity=None):
    """Circuit for ``exp(i alpha x_i x_j^2)``: three splitters, two cubic gates and a corrective.

    ``strategy`` is ``"min_strength"`` (``s = arccos(1/sqrt 3)``) or ``"fixed_s"`` with ``s`` given.
    The corrective ``exp(-i beta x_i^3)`` is the last gate and is tagged ``"corrective"``.
    """
    i, j = modes
    arity = arity or max(modes) + 1
    if alpha == 0:
        return CircuitIR(arity, [])
    if strategy == "min_strength":
        s = S_MIN
    elif strategy == "fixed_s":
        if s is None:
            raise ValueError("fixed_s strategy needs an angle")
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    body, corr = _qnd_block(alpha, i, j, s)
    return CircuitIR(arity, body + [corr])


def decompose_cv_toffoli(beta: float, modes=(0, 1, 2), u: float = np.pi / 4, arity=None):
    """Circuit for ``exp(i beta x_i x_j x_k)`` from two QND gates and three splitters on ``(j, k)``.

    With ``2 t sin(2u) = beta`` the inner QND correctives cancel; 4 cubic gates and 9 splitters remain.
    """
    i, j, k = modes
    arity = arity or max(modes) + 1
    if beta == 0:
        return CircuitIR(arity, [])
    t = beta / (2 * np.sin(2 * u))
    # the QND acting first carries the negative strength
    q1, _ = _qnd_block(-t, i, j, S_MIN)
    q2, _ = _qnd_block(t, i, j, S_MIN)
    gates = (
        [Gate("beamsplitter", (j, k), (u,))]
        + q1
        + [Gate("beamsplitter", (j, k), (-2 * u,))]
        + q2
        + [Gate("beamsplitter", (j, k), (u,))]
    )
    return CircuitIR(arity, gates)


def _merge_rotations(gates):
    out = []
    for g in gates:
        if g.kind == "rotate" and out and out[-1].kind == "rotate" and out[-1].modes == g.modes:
            theta = out[-1].params[0] + g.params[0]
            out.pop()
            theta = (theta + np.pi) % (2 * np.pi) - np.pi
            if abs(theta) > 1e-12:
                out.append(Gate("rotate", g.modes, (theta,)))
            continue
        out.append(g)
    return out


def _finish(arity, gates, control, merge=True):
    if not merge:
        return CircuitIR(arity, _merge_rotations(gates))
    corr = [g for g in gates if g.tag == "corrective"]
    rest = _merge_rotations([g for g in gates if g.tag != "corrective"])
    total = sum(g.params[0] for g in corr)
    if corr and abs(total) > 1e-15:
        rest.append(Gate("cubic", (control,), (total,), "corrective"))
    return CircuitIR(arity, rest)


def _as_params(params):
    return params if isinstance(params, ParamVector) else ParamVector(np.asarray(params, float))


def compile_S(params, t: float, modes=(0, 1), strategy="min_strength", arity=None, merge_correctives=True):
    """Compile the controlled phase rotation sequence into cubic gates and splitters.

    Each ``x_c p_g^2`` term is a QND gate between a ``-pi/2`` and a ``+pi/2`` rotation
    of the target; adjacent rotations are merged and all correctives on the control
    mode are combined into one trailing cubic gate. ``strategy="equal"`` picks
    per-gate splitter angles so that every cubic gate, corrective included, has the
    same magnitude. With ``merge_correctives=False`` each corrective stays next to
    its QND gate, which keeps intermediate states compact.
    """
    c, g = modes
    arity = arity or max(modes) + 1
    pv = _as_params(params)
    seq = [(kind, v) for kind, v in pv.gate_sequence() if v != 0]
    if not seq:
        return CircuitIR(arity, [])
    alphas = np.array([t * v / 2 for _, v in seq])
    if strategy == "min_strength":
        angles = np.full(len(seq), S_MIN)
    elif strategy == "equal":
        angles, _ = equal_strength_plan(alphas)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    gates = []
    for (kind, _), a, s in zip(seq, alphas, angles):
        body, corr = _qnd_block(a, c, g, s)
        if kind == "p":
            gates.append(Gate("rotate", (g,), (-np.pi / 2,)))
            gates += body
            gates.append(Gate("rotate", (g,), (np.pi / 2,)))
        else:
            gates += body
        gates.append(corr)
    return _finish(arity, gates, c, merge_correctives)


def compile_T(params, t: float, modes=(0, 1, 2), u: float = np.pi / 4, arity=None):
    """Compile the Toffoli-based sequence approximating ``exp(i t x_i (x_j x_k + p_j p_k))``."""
    i, j, k = modes
    arity = arity or max(modes) + 1
    pv = _as_params(params)
    gates = []
    for kind, v in pv.gate_sequence():
        if v == 0:
            continue
        block = decompose_cv_toffoli(t * v, (i, j, k), u=u, arity=arity).gates
        if kind == "p":
            rot_in = [Gate("rotate", (j,), (np.pi / 2,)), Gate("rotate", (k,), (np.pi / 2,))]
            rot_out = [Gate("rotate", (j,), (-np.pi / 2,)), Gate("rotate", (k,), (-np.pi / 2,))]
            gates += rot_in + block + rot_out
        else:
            gates += block
    return CircuitIR(arity, _merge_rotations(_sort_rotations(gates)))


def compile_cz(params, t: float = float(np.sqrt(np.pi)), strategy="min_strength", merge_correctives=True) -> CircuitIR:
    """Ancilla-mediated CZ on modes ``(a, 1, 2) = (0, 1, 2)``.

    For ``j = 2, 1, 2, 1``: ``F_a^dag``, the controlled rotation sequence with control
    ``a`` and target ``j``, then the momentum kick ``exp(-i t x_a / 2)``.
    """
    gates = []
    for j in (2, 1, 2, 1):
        gates.append(Gate("rotate", (0,), (-np.pi / 2,)))
        gates += compile_S(params, t, (0, j), strategy, arity=3, merge_correctives=merge_correctives).gates
        gates.append(Gate("displace", (0,), (0.0, -t / (2 * np.sqrt(2)))))
    return CircuitIR(3, gates)


def _sort_rotations(gates):
    # rotations on different modes commute; order runs of them by mode so that merging sees pairs
    out, run = [], []
    for g in gates + [None]:
        if g is not None and g.kind == "rotate":
            run.append(g)
            continue
        out += sorted(run, key=lambda q: q.modes)
        run = []
        if g is not None:
            out.append(g)
    return out


def _cos_branch(a, large_cos: bool):
    """Solve ``c (1 - c^2) = a`` for ``c in (0, 1)`` on the chosen side of ``1/sqrt 3``."""
    f = lambda c: c * (1 - c * c) - a
    c0 = 1 / np.sqrt(3)
    if large_cos:
        return brentq(f, c0, 1.0, xtol=1e-15)
    return brentq(f, 0.0, c0, xtol=1e-15)


def equal_strength_plan(alphas, tol: float = 1e-12):
    """Splitter angles and common strength ``r`` with equal-magnitude cubic gates.

    Solves ``6 r cos(s_j) sin(s_j)^2 = |alpha_j|`` together with
    ``sum_j 2 r cos(s_j)^3 = r`` (merged corrective of magnitude ``r``).
    Every assignment of the two angle branches is scanned with a bracketing
    root finder, the smallest feasible ``r`` is kept and then polished by Newton
    steps on the full system.

    :returns: ``(angles, r)``; ``r`` carries the common sign of ``alphas``
    :raises ValueError: if no branch assignment admits a solution
    """
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas == 0):
        raise ValueError("all strengths must be nonzero")
    if np.any(alphas > 0) and np.any(alphas < 0):
        raise ValueError("equal-strength plan needs strengths of one sign")
    a_abs = np.abs(alphas)
    r_lo = np.max(a_abs) * np.sqrt(3) / 4 * (1 + 1e-12)
    best = None
    for branches in itertools.product((True, False), repeat=len(alphas)):
        def g(r):
            cs = [_cos_branch(a / (6 * r), b) for a, b in zip(a_abs, branches)]
            return 2 * sum(c**3 for c in cs) - 1.0

        r_hi = r_lo * 64
        rs = np.geomspace(r_lo, r_hi, 400)
        vals = np.array([g(r) for r in rs])
        idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
        for k in idx:
            r = brentq(g, rs[k], rs[k + 1], xtol=1e-15)
            if best is None or r < best[1]:
                cs = [_cos_branch(a / (6 * r), b) for a, b in zip(a_abs, branches)]
                best = (np.arccos(cs), r)
            break
    if best is None:
        raise ValueError("equal-strength plan infeasible for these strengths")
    s, r = _polish(np.asarray(best[0]), best[1], a_abs, tol)
    return s, float(np.sign(alphas[0]) * r)


def _polish(s, r, a, tol):
    z = np.concatenate([s, [r]])
    for _ in range(50):
        s, r = z[:-1], z[-1]
        F = np.concatenate([6 * r * np.cos(s) * np.sin(s) ** 2 - a, [2 * r * np.sum(np.cos(s) ** 3) - r]])
        if np.max(np.abs(F)) < tol:
            break
        n = len(s)
        J = np.zeros((n + 1, n + 1))
        ds = 6 * r * (-np.sin(s) ** 3 + 2 * np.cos(s) ** 2 * np.sin(s))
        J[np.arange(n), np.arange(n)] = ds
        J[:n, n] = 6 * np.cos(s) * np.sin(s) ** 2
        J[n, :n] = -6 * r * np.cos(s) ** 2 * np.sin(s)
        J[n, n] = 2 * np.sum(np.cos(s) ** 3) - 1
        z = z - np.linalg.solve(J, F)
    return z[:-1], z[-1]


def gate_census(circuit: CircuitIR) -> dict:
    """Number of gates of each kind."""
    return dict(Counter(g.kind for g in circuit.gates))


def cubic_strengths(circuit: CircuitIR) -> list[float]:
    return [g.params[0] for g in circuit.gates if g.kind == "cubic"]
