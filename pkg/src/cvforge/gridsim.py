"""Grid and mixed grid/Fock machinery shared by the application pipelines.

Conventions: ``hbar = 1``, ``x = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(i sqrt(2))``.
The Fourier gate ``F = exp(i pi n / 2)`` acts on position wavefunctions as
``(F psi)(p) = (2 pi)^{-1/2} int psi(x) exp(+i p x) dx``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gammaln

__all__ = [
    "centered_grid",
    "selfdual_grid",
    "fourier",
    "fourier_dagger",
    "hermite_functions",
    "continuous_arg",
    "gaussian_fock_matrices",
    "fock_derivative",
    "two_mode_basis",
    "beam_splitter_basis_change",
    "apply_field",
    "apply_matrix",
    "momentum_grid",
    "displace_x",
    "number_damping",
    "lower",
]


def centered_grid(n: int, dx: float) -> np.ndarray:
    """Points ``(j - n/2) dx`` for ``j = 0..n-1`` (``n`` even)."""
    if n % 2:
        raise ValueError("grid size must be even")
    return (np.arange(n) - n // 2) * dx


def selfdual_grid(n: int) -> tuple[np.ndarray, float]:
    """Grid whose Fourier-conjugate grid coincides with itself (``dx^2 = 2 pi / n``)."""
    dx = np.sqrt(2 * np.pi / n)
    return centered_grid(n, dx), dx


def _dft(psi, axis, dx, sign):
    n = psi.shape[axis]
    shifted = np.fft.ifftshift(psi, axes=axis)
    if sign > 0:
        out = np.fft.ifft(shifted, axis=axis) * n
    else:
        out = np.fft.fft(shifted, axis=axis)
    return np.fft.fftshift(out, axes=axis) * (dx / np.sqrt(2 * np.pi))


def fourier(psi, axis: int = -1, dx: float = 1.0):
    """Apply ``F``: ``(2 pi)^{-1/2} sum psi(x) e^{+ipx} dx`` onto ``p_k = (k - n/2) dp``."""
    return _dft(psi, axis, dx, +1)


def fourier_dagger(psi, axis: int = -1, dx: float = 1.0):
    """Apply ``F^dag`` (kernel ``e^{-ipx}``); ``dx`` is the spacing of the input grid."""
    return _dft(psi, axis, dx, -1)


def hermite_functions(nmax: int, x) -> np.ndarray:
    """Orthonormal Hermite functions ``h_0..h_nmax`` at ``x``, shape ``(nmax+1, len(x))``."""
    x = np.asarray(x, dtype=float)
    h = np.zeros((nmax + 1,) + x.shape)
    h[0] = np.pi ** -0.25 * np.exp(-0.5 * x**2)
    if nmax >= 1:
        h[1] = np.sqrt(2.0) * x * h[0]
    for n in range(2, nmax + 1):
        h[n] = np.sqrt(2.0 / n) * x * h[n - 1] - np.sqrt((n - 1) / n) * h[n - 2]
    return h


def continuous_arg(fun, s, max_step: float = 0.4, h0: float = 1e-2) -> np.ndarray:
    """Phase of ``fun`` at ``s`` continued along the straight path from ``0``.

    ``fun`` maps real arrays to nonvanishing complex arrays with ``fun(0)`` on the
    positive real axis. The path is sampled densely enough that adjacent samples
    differ in phase by less than ``max_step``; the returned phase is the branch
    that is continuous along that path.
    """
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    flat = s.ravel()
    res = np.empty_like(flat)
    for sgn in (1.0, -1.0):
        mask = (flat * sgn) >= 0 if sgn > 0 else flat < 0
        if not np.any(mask):
            continue
        smax = np.max(np.abs(flat[mask]))
        path = _adaptive_path(fun, sgn, smax, max_step, h0)
        ph = np.unwrap(np.angle(fun(path)))
        targets = flat[mask]
        guess = np.interp(np.abs(targets), np.abs(path), ph)
        principal = np.angle(fun(targets))
        res[mask] = principal + 2 * np.pi * np.round((guess - principal) / (2 * np.pi))
    out[...] = res.reshape(s.shape)
    return out


def _adaptive_path(fun, sgn, smax, max_step, h0):
    if smax == 0:
        return np.zeros(1)
    n = max(64, int(np.ceil(smax / h0)) + 1)
    for _ in range(30):
        path = sgn * np.linspace(0.0, smax, n)
        d = np.abs(np.diff(np.unwrap(np.angle(fun(path)))))
        if d.max(initial=0.0) < max_step:
            return path
        n *= 2
    raise RuntimeError("phase tracking did not resolve; function winds too fast")


def gaussian_fock_matrices(polys, s, cutoff: int) -> np.ndarray:
    """Fock matrices ``<m|G(s)|n>`` of the controlled-quadratic Gaussian unitary.

    ``G(s)`` is the single-mode operator implemented by the Trotter sequence at
    control value ``s`` (``s = t x_control``); it maps
    ``x -> pxx(s) x + pxp(s) p`` and ``p -> ppx(s) x + ppp(s) p`` in the Heisenberg
    picture. The overall phase is fixed by continuity from ``G(0) = 1``, so
    ``<0|G|0> = mu^{-1/2}`` on the continuously tracked branch, where
    ``G a G^dag = mu a + nu a^dag``.

    :returns: complex array of shape ``s.shape + (cutoff+1, cutoff+1)``
    """
    s = np.asarray(s, dtype=float)
    flat = s.ravel()
    mu, nu = polys.mu_nu(flat)
    mu = np.asarray(mu, dtype=complex)
    nu = np.asarray(nu, dtype=complex)
    arg_mu = continuous_arg(lambda z: polys.mu_nu(z)[0], flat)
    g0 = np.abs(mu) ** -0.5 * np.exp(-0.5j * arg_mu)
    ratio = -nu / mu
    G = np.zeros((flat.size, cutoff + 1, cutoff + 1), dtype=complex)
    G[:, 0, 0] = g0
    for j in range(0, cutoff - 1, 2):
        G[:, j + 2, 0] = ratio * np.sqrt((j + 1) / (j + 2)) * G[:, j, 0]
    # <m|a^dag G|n> = <m|G (mu a^dag - nu* a)|n> gives a recursion dividing by mu,
    # which stays bounded for arbitrarily strong squeezing
    sq = np.sqrt(np.arange(cutoff + 1))
    inv_mu = (1.0 / mu)[:, None]
    cnu = np.conj(nu)[:, None]
    for n in range(cutoff):
        col = np.zeros((flat.size, cutoff + 1), dtype=complex)
        col[:, 1:] = sq[1:] * G[:, :-1, n]
        if n > 0:
            col += cnu * sq[n] * G[:, :, n - 1]
        G[:, :, n + 1] = col * inv_mu / np.sqrt(n + 1)
    return G.reshape(s.shape + (cutoff + 1, cutoff + 1))


def fock_derivative(psi, axis, dx):
    """Spectral derivative along ``axis``."""
    n = psi.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    shape = [1] * psi.ndim
    shape[axis] = n
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(psi, axis=axis), axis=axis)


@lru_cache(maxsize=16)
def two_mode_basis(ntot: int) -> tuple[tuple[int, int], ...]:
    """Two-mode Fock labels ``(n_a, n_b)`` with ``n_a + n_b <= ntot``, grouped by total."""
    return tuple((a, n - a) for n in range(ntot + 1) for a in range(n, -1, -1))


@lru_cache(maxsize=16)
def beam_splitter_basis_change(ntot: int) -> np.ndarray:
    """Matrix ``C`` with ``|n_u, n_v> = sum C[i, j] |n_2, n_3>_i`` for ``u, v = (2 +- 3)/sqrt 2``.

    Exact within the total-photon-number truncation since the map conserves the total.
    """
    basis = two_mode_basis(ntot)
    index = {b: i for i, b in enumerate(basis)}
    C = np.zeros((len(basis), len(basis)))
    logf = gammaln(np.arange(ntot + 2) + 1)
    for j, (nu_, nv) in enumerate(basis):
        # (a2+a3)^nu (a2-a3)^nv / sqrt(2^(nu+nv) nu! nv!)
        pref = -0.5 * (nu_ + nv) * np.log(2) - 0.5 * (logf[nu_] + logf[nv])
        for i1 in range(nu_ + 1):
            for i2 in range(nv + 1):
                n2 = i1 + i2
                n3 = nu_ + nv - n2
                c = np.exp(
                    pref
                    + logf[nu_] - logf[i1] - logf[nu_ - i1]
                    + logf[nv] - logf[i2] - logf[nv - i2]
                    + 0.5 * (logf[n2] + logf[n3])
                ) * (-1) ** (nv - i2)
                C[index[(n2, n3)], j] += c
    return C


def apply_field(psi, G, axis: int, conj: bool = False):
    """Apply per-grid-point matrices ``G[x]`` to the Fock axis ``axis`` of ``psi[x, ...]``."""
    moved = np.moveaxis(psi, axis, 1)
    shp = moved.shape
    flat = moved.reshape(shp[0], shp[1], -1)
    M = G.conj() if conj else G
    out = np.einsum("xab,xbr->xar", M, flat).reshape(shp)
    return np.moveaxis(out, 1, axis)


def apply_matrix(psi, M, axis: int):
    """Apply a fixed matrix ``M`` along ``axis``."""
    return np.moveaxis(np.tensordot(M, np.moveaxis(psi, axis, 0), axes=(1, 0)), 0, axis)


def momentum_grid(x) -> np.ndarray:
    """Conjugate grid of :func:`fourier` for a centred grid ``x``."""
    n = len(x)
    dx = x[1] - x[0]
    return (np.arange(n) - n // 2) * 2 * np.pi / (n * dx)


def displace_x(psi, x, shift, axis: int = 0):
    """``psi(x - shift)`` along ``axis`` via a Fourier phase ramp (``exp(-i shift p)``)."""
    p = np.fft.fftfreq(len(x), d=x[1] - x[0]) * 2 * np.pi
    shape = [1] * psi.ndim
    shape[axis] = len(x)
    ramp = np.exp(-1j * shift * p).reshape(shape)
    return np.fft.ifft(np.fft.fft(psi, axis=axis) * ramp, axis=axis)


def number_damping(psi, x, gamma, axis: int = 0):
    """``exp(-gamma n)`` along ``axis`` by symmetric splitting of ``(x^2 + p^2 - 1)/2``.

    The splitting error is ``O(gamma^3)``, negligible for the small loss rates it serves.
    """
    shape = [1] * psi.ndim
    shape[axis] = len(x)
    half = np.exp(-gamma * (x**2 - 0.5) / 4).reshape(shape)
    p = np.fft.fftfreq(len(x), d=x[1] - x[0]) * 2 * np.pi
    mid = np.exp(-gamma * (p**2 - 0.5) / 2).reshape(shape)
    out = half * psi
    out = np.fft.ifft(np.fft.fft(out, axis=axis) * mid, axis=axis)
    return half * out


def lower(psi, x, axis: int = 0):
    """Annihilation operator ``(x + d/dx)/sqrt 2`` along ``axis`` (spectral derivative)."""
    shape = [1] * psi.ndim
    shape[axis] = len(x)
    return (x.reshape(shape) * psi + fock_derivative(psi, axis, x[1] - x[0])) / np.sqrt(2)
