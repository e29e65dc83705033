import math

import pytest

import oldroyd


def test_derived_parameters():
    p = oldroyd.derive_params(1.0, 0.5, 1.0)
    assert p["mu"] == pytest.approx(1.0)
    assert p["gamma"] == pytest.approx(1.0)
    assert p["delta"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        oldroyd.derive_params(1.0, 1.0, 1.0)


def test_mesh_and_space_counts():
    m = oldroyd.mesh_counts(2)
    assert m["vertices"] == 9
    assert m["triangles"] == 8
    s = oldroyd.space_info(2, "mini")
    assert s["velocity_dofs"] == 34
    assert s["pressure_dofs"] == 9
    th = oldroyd.space_info(2, "taylor_hood")
    assert th["velocity_dofs"] == 50


def test_kernel_positivity_sample():
    vals = [((-1) ** k) * math.sin(0.1 * k) for k in range(100)]
    assert oldroyd.kernel_quadratic_form(vals, 1.0, 0.01) >= -1e-12


def test_infsup_positive():
    est = oldroyd.estimate_infsup(8, "mini")
    assert not est["warning"]
    assert est["value"] > 0.1


def test_galerkin_error_decreases():
    coarse = oldroyd.run_galerkin(n=8, dt=2e-3, T=0.05, kernel_rule="pw_linear")
    fine = oldroyd.run_galerkin(n=16, dt=2e-3, T=0.05, kernel_rule="pw_linear")
    assert not coarse["solver_failed"] and not fine["solver_failed"]
    assert fine["velocity_h1"] < coarse["velocity_h1"]


def test_two_level_collapse():
    res = oldroyd.run_two_level(coarse_n=8, fine_n=8, dt=5e-3, T=0.025,
                                solver_tol=1e-12, picard_tol=1e-12)
    assert res["gap_h1"] <= 1e-8 * max(1.0, res["err"]["velocity_h1"] / 1e-3)


def test_observed_order():
    fit = oldroyd.observed_order([1e-2, 2.5e-3], [1 / 8, 1 / 16])
    assert fit["successive"][0] == pytest.approx(2.0)
