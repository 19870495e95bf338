import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvforge.optimize import (
    ConvergenceError,
    Objective,
    ParamSet,
    basin_hop,
    catalog_load,
    catalog_store,
    default_catalog_path,
    find_set,
    seed_order_conditions,
)
from cvforge.polycore import order_condition_residuals


def test_seed_first_order_single_pair():
    np.testing.assert_allclose(seed_order_conditions(1, 1).entries, [1.0, 1.0], atol=1e-10)


def test_seed_second_order_two_pairs():
    pv = seed_order_conditions(2, 2)
    assert np.max(np.abs(order_condition_residuals(pv.entries, 2))) < 1e-10
    # the solutions form a one-parameter family; Newton from the uniform point lands next to the symmetric one
    np.testing.assert_allclose(pv.entries, [1 - np.sqrt(0.5), np.sqrt(0.5), np.sqrt(0.5), 1 - np.sqrt(0.5)],
                               atol=1e-5)


def test_seed_third_order_with_pinned_entry():
    pv = seed_order_conditions(3, 3, [0.397])
    np.testing.assert_allclose(pv.entries, [0.397, -0.7931, -0.0325, 1.5393, 0.6355, 0.2539], atol=2e-4)
    assert np.max(np.abs(order_condition_residuals(pv.entries, 3))) < 1e-10


def test_seed_infeasible():
    with pytest.raises((ValueError, ConvergenceError)):
        seed_order_conditions(1, 3)
    with pytest.raises(ValueError):
        seed_order_conditions(1, 1, [0.1, 0.2])
    with pytest.raises(ValueError):
        seed_order_conditions(0, 1)


def test_paramset_validation():
    with pytest.raises(ValueError):
        ParamSet("x", [np.inf, 0.0], 1.0)
    with pytest.raises(ValueError):
        ParamSet("x", [1.0, 0.0], 1.0, application="teleport")
    ps = ParamSet("x", [1.0, 0.0, 0.5, 0.5], 1.0, repetitions=3)
    assert ps.L == 9


def test_bundled_catalog():
    sets = catalog_load()
    names = {s.name for s in sets}
    assert {"square_L3", "square_L7", "cz_L9", "mf_L11", "third_order_L60"} <= names
    assert find_set("L7_square", sets).name == "square_L7"
    assert find_set("third_order_L60", sets).L == 60
    with pytest.raises(KeyError):
        find_set("nothing_here", sets)


def test_catalog_roundtrip_and_env(tmp_path, monkeypatch):
    sets = [ParamSet("b", [0.1, 0.2], 1.0), ParamSet("a", [0.3, 0.4], 2.0, "cz", "bundled", 0.1)]
    path = tmp_path / "cat.json"
    catalog_store(sets, path)
    assert [r["name"] for r in json.loads(path.read_text())] == ["a", "b"]
    monkeypatch.setenv("CVFORGE_CATALOG", str(path))
    assert default_catalog_path() == str(path)
    back = catalog_load()
    assert [s.to_dict() for s in back] == [s.to_dict() for s in sorted(sets, key=lambda s: s.name)]
    with pytest.raises(ValueError):
        catalog_store(sets + [ParamSet("a", [0.0, 0.0], 1.0)], path)


def test_catalog_malformed(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValueError):
        catalog_load(bad)
    bad.write_text(json.dumps([{"name": "x"}]))
    with pytest.raises(ValueError):
        catalog_load(bad)


def test_objective_kinds():
    with pytest.raises(ValueError):
        Objective("speed")
    obj = Objective("supnorm", t_max=1.0)
    assert obj([1.0, 1.0]) > obj([0.2929, 0.7071, 0.7071, 0.2929])


def _quadratic(z):
    return float(np.sum((np.asarray(z) - 0.3) ** 2))


@pytest.mark.parametrize("seed", [0, 5])
def test_basin_hop_bitwise_reproducible(seed):
    kw = dict(hops=6, batch=3, budget=80, rng_seed=seed, step_scale=0.2)
    a = basin_hop(Objective("supnorm", t_max=1.5), [0.5, 0.5, 0.5, 0.5], **kw)
    b = basin_hop(Objective("supnorm", t_max=1.5), [0.5, 0.5, 0.5, 0.5], **kw)
    assert a.entries == b.entries
    assert a.objective == b.objective
    with ThreadPoolExecutor(3) as ex:
        c = basin_hop(Objective("supnorm", t_max=1.5), [0.5, 0.5, 0.5, 0.5], executor=ex, **kw)
    assert c.entries == a.entries


def test_basin_hop_finds_minimum_and_keeps_best():
    res = basin_hop(_quadratic, [2.0, -1.0], hops=4, batch=2, budget=200, t=1.0)
    np.testing.assert_allclose(res.entries, [0.3, 0.3], atol=1e-3)
    hist = res.extra["history"]
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    assert res.provenance == "optimized"


def test_basin_hop_survives_failing_objective():
    def flaky(z):
        if z[0] > 1.0:
            raise RuntimeError("outside model range")
        return _quadratic(z)

    res = basin_hop(flaky, [0.5, 0.5], hops=4, batch=2, budget=60, step_scale=2.0, t=1.0)
    assert np.isfinite(res.objective)


@given(st.integers(0, 2**31 - 1))
def test_basin_hop_seed_determines_result(seed):
    a = basin_hop(_quadratic, [1.0, 1.0], hops=2, batch=2, budget=20, rng_seed=seed, t=1.0)
    b = basin_hop(_quadratic, [1.0, 1.0], hops=2, batch=2, budget=20, rng_seed=seed, t=1.0)
    assert a.entries == b.entries
