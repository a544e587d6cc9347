import numpy as np
import pytest

from torusflow.errors import ValidationError
from torusflow.spaceform import (
    QuadraticFormInputs,
    center_manifold_dim,
    kappa_hyperbolic_form,
    kappa_sphere_form,
    l0prime_eigenvalue,
    l1_spectrum,
    lambda_jk,
    legendre_axisymmetric_oracle,
    one_form_spectrum,
    scalar_spectrum,
    teichmuller_null_dim,
    volume_flow_verdict,
    volume_hyperbolic_form,
    write_spaceform_csv,
)


@pytest.mark.parametrize("j,k,n,expected", [
    (0, 1.0, 3, 0.0),
    (1, 1.0, 2, -2.0),
    (2, 1.0, 3, -8.0),
    (1, 2.0, 4, -8.0),
])
def test_lambda_jk_values(j, k, n, expected):
    assert lambda_jk(j, k, n) == expected


def test_lambda_jk_strictly_decreasing():
    for n in (2, 3, 4):
        for k in (1.0, 2.0):
            vals = scalar_spectrum(n, k, 8)
            assert all(b < a for a, b in zip(vals, vals[1:]))


def test_one_form_families_coincide_for_surfaces():
    vals = one_form_spectrum(2, 1.0, 4)
    assert len(vals) == 8
    assert vals[::2] == vals[1::2]  # the (n-2)k shift vanishes


def test_one_form_n3_contains_quoted_pair():
    vals = one_form_spectrum(3, 1.0, 1)
    assert -3.0 in vals and -4.0 in vals


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("k", [1.0, 2.0])
def test_l1_max_is_minus_k(n, k):
    assert max(l1_spectrum(n, k, 6)) == pytest.approx(-k, abs=1e-13)


def test_volume_verdict_sphere_unstable():
    v = volume_flow_verdict(3, 1.0)
    assert v.l2_verdict == "unstable"
    assert v.l2_unstable_eigenvalue == 1.0
    assert v.l1_max_eigenvalue == -1.0
    # consistency with the trace-part eigenvalue at level 1
    assert l0prime_eigenvalue(1, 1.0, 3) == pytest.approx(1.0)
    assert lambda_jk(1, 1.0, 3) + 2 * 2 * 1.0 == pytest.approx(1.0)


def test_volume_verdict_surface_weakly_stable():
    v = volume_flow_verdict(2, 1.0)
    assert v.l2_verdict == "weakly_stable"
    assert v.l2_unstable_eigenvalue is None
    assert "level-0 or level-1" in v.l2_null_eigenspace


def test_volume_verdict_consistency_formula():
    for n in (3, 4, 5):
        for k in (1.0, 0.5):
            v = volume_flow_verdict(n, k)
            assert v.l2_unstable_eigenvalue == pytest.approx((n - 2) * k)
            assert v.l2_unstable_eigenvalue == pytest.approx(
                lambda_jk(1, k, n) + 2 * (n - 1) * k)


def test_l0prime_levels():
    assert l0prime_eigenvalue(0, 1.0, 3) == 0.0
    assert l0prime_eigenvalue(2, 1.0, 3) == pytest.approx(-8.0 + 4.0)


def test_kappa_hyperbolic_form_values():
    assert kappa_hyperbolic_form(3, QuadraticFormInputs()) == 0.0
    only_h = QuadraticFormInputs(h_sq=1.0, f_sq=1.0)  # h = f (traceless)
    assert kappa_hyperbolic_form(3, only_h) == pytest.approx(-0.25)
    assert kappa_hyperbolic_form(2, only_h) == pytest.approx(0.0)


def test_kappa_hyperbolic_strictly_negative_n3():
    rng = np.random.default_rng(0)
    for _ in range(20):
        h_sq = rng.uniform(0.1, 3.0)
        inp = QuadraticFormInputs(T_sq=rng.uniform(0, 2), div_h_sq=rng.uniform(0, 2),
                                  H_sq=rng.uniform(0, 2), h_sq=h_sq)
        assert kappa_hyperbolic_form(3, inp) < 0.0


def test_kappa_sphere_exhibits_unit_eigenvalue():
    # h = c g on a unit-volume base: f = 0, grad H = 0, ||H||^2 = n
    n = 3
    inp = QuadraticFormInputs(H_sq=float(n))
    assert kappa_sphere_form(n, inp) == pytest.approx(1.0)


def test_volume_hyperbolic_null_on_cg():
    # h = c g on a volume-V base: ||H||^2 = n^2 c^2 V, Hbar = n c
    n, k, c, vol = 3, -1.0, 0.7, 2.3
    inp = QuadraticFormInputs(H_sq=n**2 * c**2 * vol, H_bar=n * c, volume=vol)
    assert volume_hyperbolic_form(n, k, inp) == pytest.approx(0.0, abs=1e-14)
    assert volume_hyperbolic_form(n, k, QuadraticFormInputs()) == 0.0


def test_quadratic_inputs_validation():
    with pytest.raises(ValidationError):
        QuadraticFormInputs(T_sq=-1.0)
    good = QuadraticFormInputs(H_sq=2.0, f_sq=1.0, h_sq=2.0 / 3 + 1.0)
    good.check_decomposition(3)
    bad = QuadraticFormInputs(H_sq=2.0, f_sq=1.0, h_sq=5.0)
    with pytest.raises(ValidationError):
        bad.check_decomposition(3)


@pytest.mark.parametrize("genus,p,q,expected,ok", [
    (2, 0, 0, 6, True),
    (1, 0, 0, 0, False),
    (3, 0, 0, 12, True),
    (2, 1, 2, 13, True),
])
def test_teichmuller_dim(genus, p, q, expected, ok):
    dim = teichmuller_null_dim(genus, p, q)
    assert dim.value == expected
    assert dim.in_hypothesis is ok


def test_center_manifold_dim():
    assert center_manifold_dim(2, 2) == 7
    assert center_manifold_dim(3) == 1
    assert center_manifold_dim(5) == 1
    assert center_manifold_dim(2, 3) == 13
    with pytest.raises(ValidationError):
        center_manifold_dim(2, 1)


def test_legendre_oracle_constant_null():
    eigs = legendre_axisymmetric_oracle(256, 3, 1.0)
    assert abs(eigs[0]) <= 1e-8


def test_legendre_oracle_matches_formula():
    eigs = legendre_axisymmetric_oracle(512, 4, 1.0)
    for j in range(1, 5):
        target = lambda_jk(j, 1.0, 2)  # -j(j+1)
        assert abs(eigs[j] - target) <= 0.01 * abs(target)


def test_legendre_oracle_second_order():
    target = lambda_jk(4, 1.0, 2)
    e_coarse = abs(legendre_axisymmetric_oracle(256, 4, 1.0)[4] - target)
    e_fine = abs(legendre_axisymmetric_oracle(512, 4, 1.0)[4] - target)
    assert 3.0 <= e_coarse / e_fine <= 5.0


def test_legendre_oracle_curvature_scaling():
    e1 = legendre_axisymmetric_oracle(256, 2, 1.0)
    e2 = legendre_axisymmetric_oracle(256, 2, 2.0)
    assert np.allclose(2 * e1, e2, atol=1e-12)


def test_spaceform_csv(tmp_path):
    path = tmp_path / "sf.csv"
    write_spaceform_csv(path, 3, 1.0, 3)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "family,j,value"
    # the destabilizing trace-part value (n-2)k = 1 appears at level 1
    assert any(ln.startswith("L0prime,1,") and float(ln.split(",")[2]) == 1.0
               for ln in lines[1:])
