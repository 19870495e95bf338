import numpy as np
import pytest

from cvforge.gkp import GkpSpec, default_grid, gaussian_gkp, optimal_k
from cvforge.gridsim import selfdual_grid
from cvforge.optimize import find_set
from cvforge.schemes import (
    LOSS_POSITIONS,
    BranchError,
    QubitModeState,
    branch_sqrt_track,
    conditional_amplitude,
    conditional_gkp,
    conditional_magic,
    cz_gate,
    ideal_logical_state_prep,
    logical_state_prep,
    loss_study,
    magic_p0,
    measurement_free_schedule,
    p0_density,
    p0_statistics,
    p0_total_probability,
    solve_window,
)
from cvforge.schemes import _rabi_gate

SQRT_PI = np.sqrt(np.pi)
T_SQ = SQRT_PI / 2
K5 = np.sqrt(21 * np.pi / 4)


@pytest.fixture(scope="module")
def square_l3():
    return find_set("square_L3").params()


def test_branch_tracking_follows_winding():
    s = np.linspace(0, 3 * np.pi, 400)
    root = branch_sqrt_track(np.exp(1j * s))
    np.testing.assert_allclose(root, np.exp(0.5j * s), atol=1e-12)
    with pytest.raises(BranchError):
        branch_sqrt_track([1.0, 0.0, 1.0])
    with pytest.raises(BranchError):
        branch_sqrt_track(np.exp(1j * np.array([0.0, 3.0])))


def test_branch_tracking_refines_near_zero():
    nodes = np.linspace(-1, 1, 12)
    f = lambda z: z + 1e-6j  # noqa: E731
    with pytest.raises(BranchError):
        branch_sqrt_track(f(nodes))
    root = branch_sqrt_track(f(nodes), func=f, nodes=nodes)
    np.testing.assert_allclose(root, np.sqrt(f(nodes)), atol=1e-12)


def test_ideal_rotation_gives_target_comb():
    x = np.linspace(-25, 25, 8001)
    res = conditional_gkp("ideal", T_SQ, K5, x=x)
    # the ideal rotation produces the comb up to the envelope-dependent peak weights
    assert res.fidelity > 0.97
    assert res.correction == pytest.approx(K5**2 / (2 * T_SQ))


def test_amplitude_density_is_outcome_density(square_l3):
    x = np.linspace(-25, 25, 8001)
    amp = conditional_amplitude(square_l3, T_SQ, K5, K5 / T_SQ, 0.3, x, correct=False)
    dens = p0_density(square_l3, T_SQ, K5, None, [0.3], x)[0]
    assert np.trapezoid(np.abs(amp) ** 2, x) == pytest.approx(dens)


@pytest.mark.parametrize("params", ["ideal", "square_L3", "square_L7"])
def test_outcome_probability_sums_to_one(params):
    p = params if params == "ideal" else find_set(params).params()
    assert p0_total_probability(p, T_SQ, K5) == pytest.approx(1.0, abs=1e-6)


def test_window_solver_consistent(square_l3):
    c = solve_window(square_l3, T_SQ, K5, 0.01)
    st = p0_statistics(square_l3, T_SQ, K5, window=(-c, c))
    assert st["probability"] == pytest.approx(0.01, rel=1e-9)
    assert st["min_fidelity"] <= st["mean_fidelity"]
    with pytest.raises(ValueError):
        p0_statistics(square_l3, T_SQ, K5, window=(1.0, -1.0))


def test_one_sided_windows_add_up(square_l3):
    c = solve_window(square_l3, T_SQ, K5, 0.002)
    hi = p0_statistics(square_l3, T_SQ, K5, window=(0, c))["probability"]
    lo = p0_statistics(square_l3, T_SQ, K5, window=(-c, 0))["probability"]
    assert hi + lo == pytest.approx(0.002, rel=1e-9)


def test_magic_outcome():
    assert magic_p0(4.0) == pytest.approx(np.pi**2 / (8 * 4.0 * SQRT_PI))
    res = conditional_magic("ideal", 4.0)
    assert res.p0 == pytest.approx(magic_p0(4.0))
    assert 0.85 < res.fidelity < 1.0


def test_nonstandard_alpha_flagged(square_l3):
    res = conditional_gkp(square_l3, T_SQ, K5, alpha=2.0)
    assert res.extra.get("nonstandard_alpha")


def test_cz_identity_injection():
    res = cz_gate("ideal", points=1024)
    assert res.worst_case >= 1 - 1e-4
    rho = res.density([0.5, 0.5, 0.5, 0.5])
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-6)


def test_measurement_free_schedule_values():
    v, w, u = measurement_free_schedule(2, [0.0, 0.093])
    np.testing.assert_allclose(v, [-2 * SQRT_PI, SQRT_PI])
    np.testing.assert_allclose(w, [-SQRT_PI / 8, SQRT_PI / 4])
    with pytest.raises(ValueError):
        measurement_free_schedule(2, [0.1])


def test_qubit_mode_state_roundtrip():
    x, dx = selfdual_grid(256)
    psi = np.pi**-0.25 * np.exp(-x**2 / 2)
    st = QubitModeState.from_qubit(x, psi, (0.6, 0.8j), ntot=4)
    c0, c1 = st.qubit_components()
    np.testing.assert_allclose(c0, 0.6 * psi, atol=1e-12)
    np.testing.assert_allclose(c1, 0.8j * psi, atol=1e-12)
    assert st.norm() == pytest.approx(1.0)


@pytest.mark.parametrize("u", [0.3, -0.7])
def test_dual_rail_rabi_gate_matches_two_level(u):
    """``exp(i u x sigma_y)`` on the dual-rail Fock ancilla against the two-level closed form."""
    x, dx = selfdual_grid(512)
    psi = np.pi**-0.25 * np.exp(-x**2 / 2)
    st = _rabi_gate(QubitModeState.from_qubit(x, psi, (1.0, 0.0), ntot=6), "ideal", u, "x_sy")
    c0, c1 = st.qubit_components()
    np.testing.assert_allclose(c0, np.cos(u * x) * psi, atol=1e-9)
    np.testing.assert_allclose(c1, -np.sin(u * x) * psi, atol=1e-9)


def test_logical_passthrough_with_ideal_gates():
    k = 4.0
    x, _ = selfdual_grid(2048)
    comb = gaussian_gkp(GkpSpec(2 * SQRT_PI, k, odd_phase=-1), x)
    out = ideal_logical_state_prep(comb, (1.0, 0.0), k)
    assert out["measured_fidelity"] > 0.999
    fock = logical_state_prep(comb, (1.0, 0.0), "ideal", k, points=2048, ntot=6)
    assert fock["measured_fidelity"] == pytest.approx(out["measured_fidelity"], abs=1e-3)


def test_loss_study_inputs():
    with pytest.raises(ValueError):
        loss_study(0.2)
    with pytest.raises(ValueError):
        loss_study(0.01, active="LC9")
    assert LOSS_POSITIONS == ("LC1", "LC2", "LC3", "LC4")
    res = loss_study(0.0, active="none", points=(128, 1024))
    assert res.branches == 1 and res.channels == ()


def test_loss_lowers_fidelity_monotonically():
    f = [loss_study(eta, active="LC2", points=(128, 1024)).fidelity for eta in (0.0, 0.01, 0.02)]
    assert f[0] > f[1] > f[2]


def test_loss_study_single_mode_channel():
    res = loss_study(0.02, active=[("LC1", 1)], points=(128, 1024))
    assert res.channels == (("LC1", 1),)


def test_magic_set_l16_close_to_ideal_saturation():
    k = optimal_k(SQRT_PI, 1)
    x = default_grid(k, SQRT_PI, 4001)
    ideal = conditional_magic("ideal", k, x=x).fidelity
    l16 = conditional_magic(find_set("magic_L16").params(), k, x=x).fidelity
    assert abs(l16 - ideal) <= 0.01, f"L=16 {l16:.4f} vs ideal {ideal:.4f}"


def test_larger_magic_sets_approach_saturation():
    k = optimal_k(SQRT_PI, 1)
    x = default_grid(k, SQRT_PI, 4001)
    f = [conditional_magic(find_set(n).params(), k, x=x).fidelity for n in ("magic_L16", "magic_L21", "magic_L25")]
    assert f[0] < f[1] < f[2] < conditional_magic("ideal", k, x=x).fidelity + 1e-3


def test_fine_input_is_low_passed_before_sampling():
    from cvforge.gkp import GridWavefunction
    from cvforge.schemes import _onto_grid

    xf = np.linspace(-20, 20, 40001)
    g = np.pi**-0.25 * np.exp(-xf**2 / 2)
    fast = GridWavefunction((xf,), g * (1 + 0.1 * np.exp(200j * xf)))
    x, dx = selfdual_grid(1024)
    amps, lost = _onto_grid(fast, x)
    np.testing.assert_allclose(amps, np.pi**-0.25 * np.exp(-x**2 / 2) / np.sqrt(1.01), atol=1e-6)
    assert lost == pytest.approx(0.01 / 1.01, rel=1e-6)
