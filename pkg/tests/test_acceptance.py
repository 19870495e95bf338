"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers, and the
lines are repeated in the terminal summary. Locked values were computed once by
independent routes and frozen here.
"""
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from cvforge.decomp import compile_S, cubic_strengths
from cvforge.gkp import GkpSpec, comb_peaks, default_grid, optimal_k
from cvforge.optimize import catalog_load, find_set
from cvforge.schemes import (
    conditional_gkp,
    conditional_magic,
    cz_fock_oracle,
    cz_gate,
    logical_state_prep,
    loss_study,
    measurement_free_protocol,
    p0_statistics,
    solve_window,
)

SQRT_PI = np.sqrt(np.pi)
T_SQ = SQRT_PI / 2
K5 = np.sqrt(21 * np.pi / 4)
HERE = Path(__file__).parent


def report(number: int, ok: bool, detail: str, seconds: float) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail} ({seconds:.1f} s)"
    print(line)
    ACCEPTANCE_LINES.append(line)


def test_criterion_1_square_l7_window():
    t0 = time.perf_counter()
    params = find_set("square_L7").params()
    c = solve_window(params, T_SQ, K5, 0.002)
    st = p0_statistics(params, T_SQ, K5, window=(-c, c))
    dt = time.perf_counter() - t0
    ok_p = abs(st["probability"] / 0.002 - 1) <= 0.1
    ok_f = st["min_fidelity"] >= 0.905
    report(1, ok_p and ok_f and dt < 10,
           f"window +-{c:.6f}, probability {st['probability']:.5f} (0.002 +-10%), "
           f"threshold fidelity {st['min_fidelity']:.6f} (>= 0.905)", dt)
    assert ok_p and ok_f and dt < 10


def test_criterion_2_gate_strengths():
    t0 = time.perf_counter()
    params = find_set("square_L3").params()
    r_min = sorted(cubic_strengths(compile_S(params, T_SQ, strategy="min_strength")))
    r_eq = np.abs(cubic_strengths(compile_S(params, T_SQ, strategy="equal")))
    dt = time.perf_counter() - t0
    expected = sorted([0.0643, 0.0643, 0.0872, 0.0872, 0.1304, 0.1304, -0.1085])
    ok_min = len(r_min) == 7 and np.allclose(r_min, expected, atol=1e-3, rtol=0)
    ok_eq = np.allclose(r_eq, 0.1675, atol=1e-3, rtol=0)
    report(2, ok_min and ok_eq and dt < 1,
           f"min-strength r {np.round(r_min, 4).tolist()}, equal |r| {np.round(np.unique(np.round(r_eq, 6)), 4).tolist()}",
           dt)
    assert ok_min and ok_eq and dt < 1


def test_criterion_3_square_l5():
    t0 = time.perf_counter()
    x = np.linspace(-25, 25, 4001)
    f = conditional_gkp(find_set("square_L5").params(), T_SQ, K5, x=x).fidelity
    dt = time.perf_counter() - t0
    report(3, f > 0.96 and dt < 5, f"L=5 fidelity at p0=0 {f:.6f} (> 0.96)", dt)
    assert f > 0.96 and dt < 5


def test_criterion_4_magic_saturation():
    t0 = time.perf_counter()
    x = np.linspace(-25, 25, 4001)
    f1 = conditional_magic("ideal", optimal_k(SQRT_PI, 1), x=x).fidelity
    f2 = conditional_magic("ideal", optimal_k(SQRT_PI, 2), x=x).fidelity
    dt = time.perf_counter() - t0
    ok = abs(f1 - 0.948) <= 0.005 and f2 >= 0.972
    report(4, ok and dt < 10, f"n=1 {f1:.6f} (0.948 +-0.005), n=2 {f2:.6f} (>= 0.972)", dt)
    assert ok and dt < 10


def test_criterion_5_combined_magic_pipeline():
    t0 = time.perf_counter()
    k = optimal_k(T_SQ, 4.5)
    ext = default_grid(k, 2 * SQRT_PI, 2)[-1]
    x = np.linspace(-ext, ext, int(2 * ext / 0.0025) + 1)
    comb = GkpSpec(2 * SQRT_PI, k, odd_phase=-1)
    psi = conditional_gkp(find_set("square_L9").params(), T_SQ, k, x=x, target=comb).psi
    out = logical_state_prep(psi, (1 / np.sqrt(2), 0.5 + 0.5j), find_set("mf_L11").params(), k)
    dt = time.perf_counter() - t0
    ok_s = abs(out["success_probability"] - 0.937) <= 0.01
    ok_f = abs(out["traced_fidelity"] - 0.953) <= 0.01
    report(5, ok_s and ok_f and dt < 60,
           f"success {out['success_probability']:.4f} (0.937 +-0.01), "
           f"traced fidelity {out['traced_fidelity']:.4f} (0.953 +-0.01), measured {out['measured_fidelity']:.4f}", dt)
    assert ok_s and ok_f and dt < 60


@pytest.mark.slow
def test_criterion_6_loss_study():
    t0 = time.perf_counter()
    lossy = loss_study(0.015, "all")
    clean = loss_study(0.0, "all")
    lossless = conditional_gkp(find_set("square_L3").params(), T_SQ, K5, x=np.linspace(-30, 30, 12001)).fidelity
    dt = time.perf_counter() - t0
    ok = lossy.fidelity > 0.90 and abs(clean.fidelity - lossless) < 1e-6
    report(6, ok and dt < 600,
           f"all 8 channels at eta=0.015 {lossy.fidelity:.6f} (> 0.90), eta=0 {clean.fidelity:.8f} "
           f"vs lossless {lossless:.8f} (|diff| {abs(clean.fidelity - lossless):.1e} < 1e-6)", dt)
    assert ok and dt < 600


CZ_LOCKED = {6: 0.8061309, 7: 0.9013286, 9: 0.9804819, 11: 0.9930977, 13: 0.9965895, 15: 0.9983165}


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::cvforge.focksim.TruncationWarning")
def test_criterion_7_cz_monotone_and_oracle():
    t0 = time.perf_counter()
    sets = sorted((s for s in catalog_load() if s.application == "cz"), key=lambda s: s.L)
    fwc = {s.L: cz_gate(s.params()).worst_case for s in sets}
    oracle = cz_fock_oracle(find_set("cz_L9").params(), cutoffs=(60, 60)).worst_case
    dt = time.perf_counter() - t0
    values = [fwc[L] for L in sorted(fwc)]
    ok_mono = sorted(fwc) == sorted(CZ_LOCKED) and all(a < b for a, b in zip(values, values[1:]))
    ok_lock = all(abs(fwc[L] - v) < 1e-6 for L, v in CZ_LOCKED.items())
    ok_or = abs(oracle - fwc[9]) < 1e-3
    report(7, ok_mono and ok_lock and ok_or and dt < 300,
           "F_wc " + ", ".join(f"L{L} {fwc[L]:.7f}" for L in sorted(fwc))
           + f"; L9 Fock oracle {oracle:.7f} (|diff| {abs(oracle - fwc[9]):.1e} < 1e-3)", dt)
    assert ok_mono and ok_lock and ok_or and dt < 300


PROPERTY_SUITE = [
    "test_polycore.py::test_symplectic_residual_1000_random_vectors",
    "test_polycore.py::test_trotter_first_order_slope",
    "test_focksim.py::test_cubic_qnd_decomposition_oracle",
    "test_focksim.py::test_cv_toffoli_decomposition_oracle",
    "test_focksim.py::test_kraus_completeness",
    "test_focksim.py::test_coherent_state_loss_closed_form",
    "test_gkp.py::test_wigner_normalization",
    "test_optimize.py::test_basin_hop_bitwise_reproducible",
]


@pytest.mark.slow
def test_criterion_8_property_suites():
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[str(HERE / n) for n in PROPERTY_SUITE]],
                          cwd=HERE.parent, capture_output=True, text=True)
    dt = time.perf_counter() - t0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    ok = proc.returncode == 0
    report(8, ok and dt < 300, f"{len(PROPERTY_SUITE)} property/oracle suites: {tail}", dt)
    assert ok and dt < 300, proc.stdout[-3000:]


MF_LOCKED_FIDELITY = 0.973139


@pytest.mark.slow
def test_criterion_9_measurement_free():
    t0 = time.perf_counter()
    res = measurement_free_protocol(2, [0.0, 0.093], 10 ** (11.5 / 20), find_set("third_order_L60").params())
    x = res["state"].x
    pos, _ = comb_peaks(x, res["marginal"] / res["norm"], rel_height=0.05)
    dt = time.perf_counter() - t0
    odd = np.array([-3, -1, 1, 3]) * SQRT_PI
    ok_peaks = len(pos) == 4 and np.max(np.abs(np.sort(pos) - odd)) < 0.05
    ok_f = abs(res["fidelity"] - MF_LOCKED_FIDELITY) < 1e-5
    report(9, ok_peaks and ok_f and dt < 600,
           f"peaks/sqrt(pi) {np.round(pos / SQRT_PI, 4).tolist()} (error < 0.05), "
           f"fidelity {res['fidelity']:.6f} (locked {MF_LOCKED_FIDELITY})", dt)
    assert ok_peaks and ok_f and dt < 600
