import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levifold import BadParams, DomainError, UnknownSurface, catalog, gauge_transform
from levifold.surface import GAUGES, GaugeFunction, as_complex, eval_jet2, point, project_to_surface

from oracles import fd_gradient, fd_hessian, rho_values, wirtinger, worm_label, zim_wre


def test_sphere_jet_at_pole(sphere):
    j = eval_jet2(sphere, point(1, 0))
    assert float(j.value) == 0.0
    assert j.rho_z == pytest.approx(1.0)
    assert j.rho_zzbar == pytest.approx(1.0)
    assert j.rho_zz == 0.0


def test_flat_jet(flat, rng):
    j = eval_jet2(flat, rng.uniform(-1, 1, size=(5, 4)))
    np.testing.assert_allclose(j.rho_z, 0.5)
    np.testing.assert_array_equal(j.real_hess, 0.0)
    np.testing.assert_array_equal(j.hess_mixed, 0.0)


def test_worm_jet_on_zero_section(worm):
    j = eval_jet2(worm, point(0, 2))
    assert abs(j.rho_z - 0.5 * np.exp(1j * np.log(4.0))) < 1e-15
    assert abs(j.rho_w) < 1e-15


def test_levi_flat_predicates(worm, sphere):
    p = worm.chart.forward(0.1, 2.0 + 0.5j)
    assert worm.in_K(p)
    assert not worm.in_K(worm.chart.forward(0.1, 0.95))  # |w| < 1
    assert not worm.in_K(point(1.1j, 2.0))  # |z| > 1 and off the surface
    assert not np.any(sphere.in_K(sphere.sample(50)))


def test_catalog_errors():
    with pytest.raises(UnknownSurface):
        catalog("klein_bottle")
    with pytest.raises(BadParams):
        catalog("worm", {"R": 1.0})
    with pytest.raises(BadParams):
        catalog("sheared_flat", {"g": "nope"})


def test_domain_error_outside_box(worm):
    with pytest.raises(DomainError):
        eval_jet2(worm, point(0, 0.1))


@pytest.mark.parametrize("name", ["sphere", "flat", "sheared_flat", "worm"])
def test_samples_lie_on_surface(name):
    s = catalog(name)
    p = s.sample(500, seed=3)
    assert np.max(np.abs(rho_values(s, p))) < 1e-12
    if s.levi_flat is not None:
        assert np.all(s.in_K(p))


def test_worm_chart_roundtrip(worm, rng):
    c = rng.uniform(-0.5, 0.5, 40)
    w = rng.uniform(1.2, 3.5, 40) * np.exp(1j * rng.uniform(-3, 3, 40))
    p = worm.chart.forward(c, w)
    np.testing.assert_allclose(worm.chart.label(p), c, atol=1e-14)
    np.testing.assert_allclose(worm_label(p), c, atol=1e-14)
    zabs = np.hypot(p[:, 0], p[:, 1])
    assert np.all(np.abs(rho_values(worm, p)) < 1e-14 * np.maximum(1, zabs))
    assert worm.chart.monodromy == pytest.approx(np.exp(4 * np.pi))


def test_sheared_flat_product_rule(sheared, rng):
    # rho = e^g x1 with g = y1 x2
    p = rng.uniform(-1, 1, size=(20, 4))
    j = eval_jet2(sheared, p)
    g = zim_wre(p)
    dg = np.stack([0 * g, p[:, 2], p[:, 1], 0 * g], axis=-1)
    Hg = np.zeros((20, 4, 4))
    Hg[:, 1, 2] = Hg[:, 2, 1] = 1.0
    e1 = np.array([1.0, 0, 0, 0])
    x1 = p[:, 0]
    grad = np.exp(g)[:, None] * (x1[:, None] * dg + e1)
    hess = np.exp(g)[:, None, None] * (
        x1[:, None, None] * (dg[:, :, None] * dg[:, None, :] + Hg)
        + dg[:, :, None] * e1[None, None, :] + e1[None, :, None] * dg[:, None, :])
    np.testing.assert_allclose(j.real_grad, grad, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(j.real_hess, hess, rtol=1e-14, atol=1e-14)


def test_identity_gauge(flat, rng):
    p = rng.uniform(-1, 1, size=(10, 4))
    a = eval_jet2(flat, p)
    b = eval_jet2(gauge_transform(flat, "zero"), p)
    np.testing.assert_array_equal(a.real_grad, b.real_grad)
    np.testing.assert_array_equal(a.real_hess, b.real_hess)


def test_gauge_wre_normal_derivative(flat):
    j = eval_jet2(gauge_transform(flat, "wre"), point(1j, 0))
    assert abs(j.rho_w) == 0.0


def test_gauge_preserves_zero_set(worm):
    gw = gauge_transform(worm, "wave")
    p = worm.sample(1000, seed=1)
    assert np.max(np.abs(gw.value(p))) < 1e-12
    q = worm.box_sampler(np.random.default_rng(2), 1000)
    np.testing.assert_array_equal(np.sign(gw.value(q)), np.sign(worm.value(q)))


@pytest.mark.parametrize("name", ["sphere", "flat", "sheared_flat", "worm"])
def test_gauge_and_inverse_gauge_roundtrip(name):
    s = catalog(name)
    g = GAUGES["wave"]
    back = gauge_transform(gauge_transform(s, g), -g)
    p = s.box_sampler(np.random.default_rng(4), 200)
    a, b = eval_jet2(s, p), eval_jet2(back, p)
    np.testing.assert_allclose(b.real_grad, a.real_grad, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(b.real_hess, a.real_hess, rtol=1e-12, atol=1e-12)
    assert back.gauges[-1].name == "-(wave)"


@pytest.mark.parametrize("name", ["sphere", "flat", "sheared_flat", "worm"])
def test_wirtinger_conversion_matches_fd(name):
    s = catalog(name)
    p = s.box_sampler(np.random.default_rng(5), 100)
    j = eval_jet2(s, p)
    f = lambda x: rho_values(s, x)  # noqa: E731
    holo, mixed, holo2 = wirtinger(fd_gradient(f, p), fd_hessian(f, p))
    scale = 1 + np.abs(j.real_grad).max()
    assert np.max(np.abs(j.holo_grad - holo)) < 1e-6 * scale
    assert np.max(np.abs(j.hess_mixed - mixed)) < 1e-5 * scale
    assert np.max(np.abs(j.hess_holo - holo2)) < 1e-5 * scale
    # real-valuedness: d/dzbar is the conjugate of d/dz, mixed Hessian hermitian
    dbar = 0.5 * (j.real_grad[..., 0::2] + 1j * j.real_grad[..., 1::2])
    np.testing.assert_allclose(dbar, np.conj(j.holo_grad), atol=1e-15)
    np.testing.assert_allclose(j.hess_mixed, np.conj(np.swapaxes(j.hess_mixed, -1, -2)), atol=1e-13)


def test_project_to_surface(worm):
    p = worm.sample(20, seed=8)
    q = project_to_surface(worm, p + 1e-4 * np.random.default_rng(0).normal(size=p.shape), iterations=3)
    assert np.max(np.abs(worm.value(q))) < 1e-13


def test_describe_is_plain_data(sheared):
    d = sheared.describe()
    assert d == {"name": "sheared_flat", "params": {"g": "zim_wre"}, "gauges": ["zim_wre"]}


def test_point_and_as_complex_roundtrip():
    z, w = as_complex(point([1 + 2j, 3j], [4.0, -1 - 1j]))
    np.testing.assert_array_equal(z, [1 + 2j, 3j])
    np.testing.assert_array_equal(w, [4.0, -1 - 1j])


coef = st.floats(-1, 1)


@settings(max_examples=25, deadline=None)
@given(coef, coef, coef, st.integers(0, 2**31 - 1))
def test_gauged_worm_jets_match_fd(a, b, c, seed):
    from levifold import jets
    g = GaugeFunction(lambda zr, zi, wr, wi: a * zr * wi + b * jets.cos(zi + wr) + c * wi * wi, "poly")
    s = gauge_transform(catalog("worm"), g)
    p = s.box_sampler(np.random.default_rng(seed), 5)
    j = eval_jet2(s, p)
    f = lambda x: rho_values(s, x)  # noqa: E731
    fg, fh = fd_gradient(f, p), fd_hessian(f, p)
    assert np.all(np.abs(j.real_grad - fg) <= 1e-6 * np.maximum(1, np.abs(j.real_grad)))
    assert np.all(np.abs(j.real_hess - fh) <= 1e-6 * np.maximum(1, np.abs(j.real_hess)).max())
