"""Gaussian GKP target states on position grids, fidelities, Wigner functions and squeezing units."""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "SQUARE_D",
    "QUNAUGHT_D",
    "HEX_D",
    "HEX_D_ALT",
    "GkpSpec",
    "GridWavefunction",
    "default_grid",
    "gaussian_gkp",
    "grid_fidelity",
    "wigner_of_grid",
    "wigner_of_mixture",
    "comb_peaks",
    "squeezing_convert",
    "misid_bound",
    "optimal_k",
]

SQUARE_D = 2 * np.sqrt(np.pi)
QUNAUGHT_D = np.sqrt(2 * np.pi)
HEX_D = np.sqrt(2 * np.pi * np.sqrt(3))
HEX_D_ALT = 2 * np.sqrt(2 * np.pi / np.sqrt(3))


@dataclass(frozen=True)
class GkpSpec:
    """Finite-energy comb ``sum_s w_s exp(-(c_s)^2/2k^2 - k^2 (x - c_s)^2/2)``.

    Peaks sit at ``c_s = d (s - delta/pi)``; the envelope stays centred at zero.
    ``odd_phase`` multiplies the peaks with odd ``s`` (``-1`` gives alternating
    signs, ``exp(i pi/4)`` the magic comb). With ``weights = (a, b)`` the state is
    ``a |comb> + b exp(i shift p) |comb>``, the second term being the comb moved
    by ``-shift`` (default ``shift = d/2``).
    """

    d: float
    k: float
    delta: float = 0.0
    odd_phase: complex = 1.0
    weights: tuple | None = None
    shift: float | None = None

    def __post_init__(self):
        if self.d <= 0 or self.k <= 0:
            raise ValueError("spacing and squeezing must be positive")
        if self.weights is not None:
            a, b = self.weights
            if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-9:
                raise ValueError("logical weights must be normalized")

    def to_json(self) -> str:
        d = asdict(self)
        d["odd_phase"] = [complex(self.odd_phase).real, complex(self.odd_phase).imag]
        if self.weights is not None:
            d["weights"] = [[complex(w).real, complex(w).imag] for w in self.weights]
        return json.dumps(d)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["odd_phase"] = complex(*d["odd_phase"])
        if d.get("weights") is not None:
            d["weights"] = tuple(complex(*w) for w in d["weights"])
        return cls(**d)


@dataclass
class GridWavefunction:
    """Amplitudes on a uniform grid, one axis per mode."""

    axes: tuple
    amps: np.ndarray

    def __post_init__(self):
        if isinstance(self.axes, np.ndarray) and self.axes.ndim == 1:
            self.axes = (self.axes,)
        self.axes = tuple(np.asarray(a, float) for a in self.axes)
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.amps.shape != tuple(len(a) for a in self.axes):
            raise ValueError("amplitude shape does not match axes")

    @property
    def x(self):
        return self.axes[0]

    @property
    def spacing(self):
        return tuple(a[1] - a[0] for a in self.axes)

    def norm(self) -> float:
        """L2 norm by the trapezoid rule."""
        w = np.abs(self.amps) ** 2
        for ax in reversed(range(w.ndim)):
            w = np.trapezoid(w, self.axes[ax], axis=ax)
        return float(np.sqrt(w))

    def normalized(self) -> "GridWavefunction":
        return GridWavefunction(self.axes, self.amps / self.norm())

    def to_csv(self, path):
        if len(self.axes) != 1:
            raise ValueError("CSV export supports one-mode wavefunctions")
        data = np.column_stack([self.x, self.amps.real, self.amps.imag])
        np.savetxt(path, data, delimiter=",", header="x,re,im", comments="")


def default_grid(k: float, d: float, points: int = 4096) -> np.ndarray:
    """Symmetric grid covering the envelope tails, extent ``1.5 (3k + 3/k + d)``."""
    ext = 1.5 * (3 * k + 3 / k + d)
    return np.linspace(-ext, ext, points)


def _comb(x, spec: GkpSpec, offset=0.0):
    k, d = spec.k, spec.d
    lo = x.min() - offset
    hi = x.max() - offset
    s_lo = int(np.floor(lo / d + spec.delta / np.pi)) - 2
    s_hi = int(np.ceil(hi / d + spec.delta / np.pi)) + 2
    s_max = int(np.ceil(6 * k / d)) + 2
    s = np.arange(max(s_lo, -s_max - 2), min(s_hi, s_max + 2) + 1)
    c = d * (s - spec.delta / np.pi)
    w = np.exp(-(c**2) / (2 * k**2)).astype(complex)
    w = np.where(s % 2 == 1, w * spec.odd_phase, w)
    return np.exp(-(k**2) * (x[:, None] - offset - c[None, :]) ** 2 / 2) @ w


def gaussian_gkp(spec: GkpSpec, x) -> GridWavefunction:
    """Normalized Gaussian GKP comb for ``spec`` on grid ``x``.

    :raises ValueError: if the grid does not cover the envelope
    """
    x = np.asarray(x, dtype=float)
    if min(-x.min(), x.max()) < 2 * spec.k + 3 / spec.k:
        raise ValueError("grid extent does not cover the comb envelope")
    amps = _comb(x, spec)
    if spec.weights is not None:
        a, b = spec.weights
        shift = spec.d / 2 if spec.shift is None else spec.shift
        zero = amps / np.sqrt(np.trapezoid(np.abs(amps) ** 2, x))
        moved = _comb(x, spec, offset=-shift)
        moved = moved / np.sqrt(np.trapezoid(np.abs(moved) ** 2, x))
        amps = a * zero + b * moved
    return GridWavefunction((x,), amps).normalized()


def grid_fidelity(a: GridWavefunction, b: GridWavefunction) -> float:
    """``|<a|b>|^2 / (<a|a><b|b>)`` on identical grids."""
    if len(a.axes) != len(b.axes) or any(
        len(u) != len(v) or not np.allclose(u, v) for u, v in zip(a.axes, b.axes)
    ):
        raise ValueError("wavefunctions live on different grids")
    ov = np.conj(a.amps) * b.amps
    na = np.abs(a.amps) ** 2
    nb = np.abs(b.amps) ** 2
    for ax in reversed(range(ov.ndim)):
        ov = np.trapezoid(ov, a.axes[ax], axis=ax)
        na = np.trapezoid(na, a.axes[ax], axis=ax)
        nb = np.trapezoid(nb, a.axes[ax], axis=ax)
    return float(min(1.0, abs(ov) ** 2 / (na * nb)))


def wigner_of_mixture(x, components, x_out, p_out) -> tuple[np.ndarray, np.ndarray]:
    """Wigner function of ``rho = sum_j |psi_j><psi_j|`` with ``components[:, j] = psi_j(x)``.

    ``W(x, p) = pi^{-1} int rho(x+y, x-y) e^{2ipy} dy``; the components are used as
    given, so their weights set the trace. ``x_out`` is snapped to the native grid
    (returned alongside) and ``y`` runs over multiples of the grid step.

    :returns: ``(x_used, W)`` with ``W`` of shape ``(len(x_used), len(p_out))``
    """
    x = np.asarray(x, dtype=float)
    comp = np.asarray(components, dtype=complex)
    if comp.ndim == 1:
        comp = comp[:, None]
    dx = x[1] - x[0]
    n = len(x)
    idx = np.clip(np.round((np.asarray(x_out, float) - x[0]) / dx).astype(int), 0, n - 1)
    p_out = np.asarray(p_out, dtype=float)
    j = np.arange(-n + 1, n)
    kern = np.exp(2j * np.outer(j * dx, p_out))
    padded = np.concatenate([np.zeros_like(comp), comp, np.zeros_like(comp)])
    W = np.empty((len(idx), len(p_out)))
    for r, i in enumerate(idx):
        corr = np.einsum("yj,yj->y", padded[n + i + j].conj(), padded[n + i - j])
        W[r] = np.real(corr @ kern) * dx / np.pi
    return x[idx], W


def wigner_of_grid(psi: GridWavefunction, x_out, p_out) -> tuple[np.ndarray, np.ndarray]:
    """Wigner function of a normalized one-mode wavefunction, see :func:`wigner_of_mixture`."""
    return wigner_of_mixture(psi.x, psi.amps / psi.norm(), x_out, p_out)


def comb_peaks(x, density, rel_height: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Local maxima of ``density`` above ``rel_height`` of its maximum.

    Positions are refined by a parabola through the logarithm of the three
    samples around each maximum, exact for Gaussian peaks.

    :returns: ``(positions, heights)`` with heights relative to the maximum
    """
    from scipy.signal import find_peaks

    x = np.asarray(x, float)
    density = np.asarray(density, float)
    top = density.max()
    idx, _ = find_peaks(density, height=rel_height * top)
    idx = idx[(idx > 0) & (idx < len(x) - 1)]
    with np.errstate(divide="ignore"):
        y0, y1, y2 = (np.log(density[idx + o]) for o in (-1, 0, 1))
    curv = y0 - 2 * y1 + y2
    shift = np.where(curv < 0, 0.5 * (y0 - y2) / np.where(curv < 0, curv, -1.0), 0.0)
    return x[idx] + shift * (x[1] - x[0]), density[idx] / top


def optimal_k(t: float, n: float) -> float:
    """Squeezing ``k = 2 t sqrt(n + 1/4)`` at which the corrective phase is periodic."""
    if n < -0.25:
        raise ValueError("n must be >= -1/4")
    return float(2 * t * np.sqrt(n + 0.25))


def squeezing_convert(value: float, unit: str = "k", t: float | None = None) -> dict:
    """Convert between ``dB = 20 log10 k``, ``k`` and the index ``n`` of ``k = 2t sqrt(n + 1/4)``.

    :param unit: ``"dB"``, ``"k"`` or ``"n"``; ``n`` needs ``t``
    :returns: ``{"dB": ..., "k": ..., "n": ...}`` (``n`` is ``None`` without ``t``)
    """
    if unit == "dB":
        k = 10 ** (value / 20)
    elif unit == "k":
        k = float(value)
    elif unit == "n":
        if t is None:
            raise ValueError("converting n needs t")
        k = optimal_k(t, value)
    else:
        raise ValueError(f"unknown unit {unit!r}")
    if k <= 0:
        raise ValueError("squeezing must be positive")
    n = None if t is None else float((k / (2 * t)) ** 2 - 0.25)
    return {"dB": float(20 * np.log10(k)), "k": float(k), "n": n}


def misid_bound(k: float) -> float:
    """Upper bound ``2/(pi k) exp(-pi k^2/4)`` on confusing the two logical combs."""
    if k <= 0:
        raise ValueError("k must be positive")
    return float(2 / (np.pi * k) * np.exp(-np.pi * k**2 / 4))
