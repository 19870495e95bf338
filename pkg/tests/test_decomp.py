import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvforge.decomp import (
    S_MIN,
    CircuitIR,
    Gate,
    compile_S,
    compile_T,
    compile_cz,
    cubic_strengths,
    decompose_cubic_qnd,
    decompose_cv_toffoli,
    equal_strength_plan,
    gate_census,
    qnd_strengths,
)
from cvforge.polycore import ParamVector

SQUARE_L3 = [0.6794, 0.4543, 0.3353, 0.0]


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("teleport", (0,))
    with pytest.raises(ValueError):
        Gate("beamsplitter", (0,), (0.1,))
    with pytest.raises(ValueError):
        Gate("beamsplitter", (1, 1), (0.1,))
    with pytest.raises(ValueError):
        CircuitIR(1, [Gate("cubic", (1,), (0.1,))])


def test_no_gates_after_homodyne():
    circ = CircuitIR(2, [Gate("homodyne", (1,), ("p", 0.0))])
    with pytest.raises(ValueError):
        circ.append(Gate("cubic", (1,), (0.1,)))
    assert len(circ) == 1
    circ.append(Gate("cubic", (0,), (0.1,)))
    assert len(circ) == 2


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=2, max_size=8).filter(lambda v: len(v) % 2 == 0))
def test_json_roundtrip(e):
    circ = compile_S(ParamVector(e), 0.9)
    back = CircuitIR.from_json(circ.to_json())
    assert back.to_json() == circ.to_json()


@given(st.floats(0.01, 2.0), st.floats(0.2, 1.3))
def test_qnd_strength_identity(alpha, s):
    r, beta = qnd_strengths(alpha, s)
    assert 6 * r * np.cos(s) * np.sin(s) ** 2 == pytest.approx(alpha)
    assert beta == pytest.approx(2 * r * np.cos(s) ** 3)


def test_min_strength_angle_minimizes_r():
    s = np.linspace(0.2, 1.4, 601)
    r = [abs(qnd_strengths(1.0, v)[0]) for v in s]
    assert abs(s[int(np.argmin(r))] - S_MIN) < 3e-3


def test_qnd_census():
    circ = decompose_cubic_qnd(0.3)
    assert gate_census(circ) == {"beamsplitter": 3, "cubic": 3}
    assert circ.gates[-1].tag == "corrective"
    assert len(decompose_cubic_qnd(0.0)) == 0
    with pytest.raises(ValueError):
        decompose_cubic_qnd(0.3, strategy="fixed_s")


def test_toffoli_census():
    assert gate_census(decompose_cv_toffoli(0.2)) == {"beamsplitter": 9, "cubic": 4}


def test_compile_s_census_and_merging():
    circ = compile_S(SQUARE_L3, np.sqrt(np.pi) / 2)
    assert gate_census(circ) == {"beamsplitter": 9, "cubic": 7, "rotate": 2}
    unmerged = compile_S(SQUARE_L3, np.sqrt(np.pi) / 2, merge_correctives=False)
    assert sum(g.tag == "corrective" for g in unmerged.gates) == 3
    merged = [g.params[0] for g in circ.gates if g.tag == "corrective"]
    assert merged[0] == pytest.approx(sum(g.params[0] for g in unmerged.gates if g.tag == "corrective"))


def test_compile_empty_and_zero_sets():
    assert len(compile_S([0.0, 0.0], 1.0)) == 0
    with pytest.raises(ValueError):
        compile_S(SQUARE_L3, 1.0, strategy="fastest")


@given(st.lists(st.floats(0.05, 1.0), min_size=2, max_size=4))
def test_equal_strength_plan_solves_system(alphas):
    s, r = equal_strength_plan(alphas)
    np.testing.assert_allclose(6 * r * np.cos(s) * np.sin(s) ** 2, alphas, rtol=1e-9)
    assert 2 * np.sum(np.cos(s) ** 3) == pytest.approx(1.0, abs=1e-9)


def test_equal_strength_plan_rejects_mixed_signs():
    with pytest.raises(ValueError):
        equal_strength_plan([0.1, -0.1])
    with pytest.raises(ValueError):
        equal_strength_plan([0.1, 0.0])


def test_equal_strategy_gives_common_magnitude():
    r = cubic_strengths(compile_S(SQUARE_L3, np.sqrt(np.pi) / 2, strategy="equal"))
    assert np.ptp(np.abs(r)) < 1e-9


def test_compile_t_census():
    circ = compile_T([0.3, 0.2], 1.0)
    census = gate_census(circ)
    assert census["cubic"] == 8 and census["beamsplitter"] == 18


def test_compile_cz_structure():
    circ = compile_cz([0.1163, 0.2294, 0.2462, 0.244], merge_correctives=False)
    assert circ.arity == 3
    assert sum(g.kind == "displace" for g in circ.gates) == 4
    targets = {g.modes[1] for g in circ.gates if g.kind == "beamsplitter"}
    assert targets == {1, 2}
