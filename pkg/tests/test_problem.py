import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergodicity_lab.grid import TorusGrid
from ergodicity_lab.problem import (
    GALLERY_IDS, ControlSet, EllipticProblem, SpecError, build_gallery, check_condition_L,
    legendre_power, parse_spec, problems_equal, to_spec,
)

G8 = TorusGrid(1, 8)


def all_gallery():
    for gid in GALLERY_IDS:
        for grid in (TorusGrid(1, 8), TorusGrid(2, 4)):
            yield gid, build_gallery(gid, {}, grid)


def test_constant_cost_shape():
    p = build_gallery("constant_cost", {"ell0": 1.0}, TorusGrid(2, 3))
    assert p.n_controls == 1
    assert np.all(p.L == 1) and np.all(p.a == 0) and np.all(p.b == 0)


def test_viscous_quadratic_cost_form():
    p = build_gallery("viscous_superlinear", {"m": 2, "sigma": 0.0, "R": 2.0, "k": 5}, G8)
    q = p.controls.points[:, 0]
    f = 1 - np.cos(2 * np.pi * G8.coords[:, 0])
    np.testing.assert_allclose(p.L, f[:, None] + 0.5 * q[None, :] ** 2, atol=1e-15)
    assert np.all(p.a == 0)
    np.testing.assert_array_equal(p.b[:, :, 0], np.broadcast_to(q, (8, 5)))


def test_eikonal_form():
    p = build_gallery("eikonal_f", {}, G8)
    np.testing.assert_array_equal(p.controls.points[:, 0], [-1.0, 0.0, 1.0])
    assert np.all(p.a == 0)
    np.testing.assert_array_equal(p.b[:, :, 0], np.tile([-1.0, 0.0, 1.0], (8, 1)))
    f = 1 - np.cos(2 * np.pi * G8.coords[:, 0])
    np.testing.assert_allclose(p.L, np.repeat(f[:, None], 3, axis=1))


@pytest.mark.parametrize("m, q, expected", [(2, 1.0, 0.5), (2, 0.0, 0.0), (3, 1.0, 2 / 3)])
def test_legendre_examples(m, q, expected):
    assert legendre_power(m, [q]) == pytest.approx(expected, abs=1e-15)


@given(st.sampled_from([1.5, 2.0, 3.0]), st.floats(-3, 3))
def test_legendre_is_fenchel_conjugate(m, q):
    p = np.linspace(-30, 30, 600_001)
    brute = np.max(p * q - np.abs(p) ** m / m)
    assert legendre_power(m, [q]) == pytest.approx(brute, abs=1e-6)


def test_legendre_rejects_m_le_1():
    with pytest.raises(ValueError):
        legendre_power(1.0, [1.0])


def test_gallery_diffusion_nonnegative():
    for gid, p in all_gallery():
        assert p.a.min() >= 0, gid


def test_unknown_gallery_and_param():
    with pytest.raises(ValueError):
        build_gallery("nope", {}, G8)
    with pytest.raises(ValueError):
        build_gallery("eikonal_f", {"bogus": 1}, G8)
    with pytest.raises(ValueError):
        build_gallery("viscous_superlinear", {"m": 1.0}, G8)
    with pytest.raises(ValueError):
        build_gallery("uniformly_elliptic", {"theta": 0.5}, G8)


def test_condition_L_all_k0():
    rep = check_condition_L(build_gallery("eikonal_f", {}, G8))
    assert rep.ok and rep.margin == math.inf


def quad_problem(core, outside):
    """f with min 0 / max 2 on a grid containing x = 0 and x = 1/2, quadratic control cost."""
    grid = TorusGrid(1, 4)
    f = 1 - np.cos(2 * np.pi * grid.coords[:, 0])
    inside = np.linspace(-core, core, 5)
    pts = np.concatenate([inside, [-outside, outside]])
    mask = np.abs(pts) <= core
    L = f[:, None] + 0.5 * pts[None, :] ** 2
    k = len(pts)
    return EllipticProblem(grid, ControlSet(pts, mask), np.zeros((4, k, 1)), np.zeros((4, k, 1)), L)


def test_condition_L_examples():
    ok = check_condition_L(quad_problem(2.0, 2.5))
    assert ok.L0 == pytest.approx(2.0) and ok.ok and ok.margin == pytest.approx(3.125 - 2.0)
    bad = check_condition_L(quad_problem(1.0, 1.25))
    assert not bad.ok and bad.margin == pytest.approx(0.78125 - 2.0)


@given(st.integers(0, 2**9 - 1), st.integers(0, 8))
def test_condition_L_monotone_in_K0(bits, extra):
    # nested masks on a quadratic-cost problem: enlarging K0 keeps L0 (q = 0 is always inside)
    p = build_gallery("viscous_superlinear", {"k": 9, "sigma": 0.0}, TorusGrid(1, 4))
    pts = p.controls.points[:, 0]
    small = np.array([(bits >> i) & 1 for i in range(9)], bool) | (pts == 0)
    large = small.copy()
    large[extra] = True
    rs = check_condition_L(EllipticProblem(p.grid, ControlSet(pts, small), p.a, p.b, p.L))
    rl = check_condition_L(EllipticProblem(p.grid, ControlSet(pts, large), p.a, p.b, p.L))
    assert rl.L0 <= rs.L0 + 1e-15
    if rs.ok:
        assert rl.ok


def test_gallery_default_truncation_is_certified():
    for gid in ("viscous_superlinear", "superquadratic"):
        for grid in (TorusGrid(1, 8), TorusGrid(2, 8)):
            assert check_condition_L(build_gallery(gid, {}, grid)).ok


def test_spec_roundtrip_tabulated():
    for gid, p in all_gallery():
        q = parse_spec(to_spec(p))
        assert problems_equal(p, q), gid


def test_spec_roundtrip_gallery_reference():
    p = build_gallery("constant_cost", {}, G8)
    assert problems_equal(parse_spec(to_spec(p, tabulated=False)), p)


def base_doc():
    return json.loads(to_spec(build_gallery("eikonal_f", {}, TorusGrid(1, 4))))


def test_spec_negative_diffusion_rejected():
    doc = base_doc()
    doc["coefficients"]["a"][5] = -0.1
    with pytest.raises(SpecError, match="ellipticity violated"):
        parse_spec(json.dumps(doc))


def test_spec_duplicate_controls_rejected():
    doc = base_doc()
    doc["controls"]["points"][1] = doc["controls"]["points"][0]
    with pytest.raises(SpecError, match="duplicate"):
        parse_spec(json.dumps(doc))


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.pop("grid"), "grid"),
    (lambda d: d["coefficients"]["L"].pop(), "coefficients.L"),
    (lambda d: d["coefficients"].pop("b"), "coefficients.b"),
])
def test_spec_errors_are_located(mutate, where):
    doc = base_doc()
    mutate(doc)
    with pytest.raises(SpecError) as err:
        parse_spec(json.dumps(doc))
    assert err.value.location == where


def test_spec_rejects_nan_and_garbage():
    text = to_spec(build_gallery("constant_cost", {}, TorusGrid(1, 2))).replace("1.0]", "NaN]")
    with pytest.raises(SpecError):
        parse_spec(text)
    with pytest.raises(SpecError):
        parse_spec("{not json")


def test_shift_and_restrict():
    p = build_gallery("eikonal_f", {}, G8)
    np.testing.assert_allclose(p.shifted(0.5).L, p.L + 0.5)
    r = p.restricted([0, 2])
    assert r.n_controls == 2 and np.array_equal(r.controls.points[:, 0], [-1.0, 1.0])
    assert p.m0() == pytest.approx(2.0)
