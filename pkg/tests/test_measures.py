import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diraclab.errors import MeasureError, ScaleError, SingularPointError
from diraclab.measures import (
    ChargeDistribution,
    GaussianCharge,
    PointCharge,
    SignedChargeDistribution,
    load_measure,
    nu_max,
    potential,
    radial_potential,
    scale_mass,
    support_radius,
    total_mass,
    translate,
)

from oracles import radial_integral

C = ChargeDistribution
coord = st.floats(-3, 3, allow_nan=False)
point3 = st.tuples(coord, coord, coord)


def test_total_mass_examples():
    assert total_mass(C()) == 0.0
    assert total_mass(C.from_atoms([(0, 0, 0), (1, 0, 0)], [0.5, 0.3])) == 0.8
    assert total_mass(C.point(0.4) + C.cloud(0.2, 1.0)) == pytest.approx(0.6, rel=1e-15)


def test_nu_max_examples():
    assert nu_max(C.cloud(0.5, 1.0)) == 0.0
    assert nu_max(C.from_atoms([(0, 0, 0), (1, 0, 0)], [0.3, 0.7])) == 0.7
    assert nu_max(C.point(0.5) + C.cloud(0.9, 1.0)) == 0.5


def test_potential_examples():
    assert potential(C.point(0.5), (2, 0, 0)) == 0.25
    two = C.from_atoms([(0.5, 0, 0), (-0.5, 0, 0)], [0.45, 0.45])
    assert potential(two, (0, 0, 0)) == pytest.approx(1.8, rel=1e-15)
    assert potential(C.cloud(1.0, 1.0), (0, 0, 0)) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)


def test_potential_at_atom_raises():
    with pytest.raises(SingularPointError):
        potential(C.point(0.5, (1, 2, 3)), (1, 2, 3))


def test_cloud_potential_against_shell_quadrature():
    # V(x) = int rho(y)/|x-y| dy; for a radial density, Newton's shell formula
    sigma, w = 0.7, 0.6
    mu = C.cloud(w, sigma)
    rho = lambda r: w * math.exp(-r * r / (2 * sigma**2)) / (2 * math.pi * sigma**2) ** 1.5
    rng = np.random.default_rng(0)
    for r in rng.uniform(0.01, 5.0, 20):
        inner = radial_integral(rho, r) / r
        outer = 4 * math.pi * __import__("scipy").integrate.quad(lambda s: rho(s) * s, r, np.inf, epsabs=1e-15)[0]
        assert potential(mu, (r, 0, 0)) == pytest.approx(inner + outer, abs=1e-8)


def test_small_argument_branch_continuous():
    mu = C.cloud(1.0, 1.0)
    s = math.sqrt(2.0)
    for z in (0.99e-3, 1.01e-3):
        r = z * s
        exact = math.erf(z) / r
        assert potential(mu, (r, 0, 0)) == pytest.approx(exact, rel=1e-14)


def test_radial_potential_examples():
    ball = C.ball(0.9, 1.0)
    assert radial_potential(ball, 2.0) == pytest.approx(0.45, rel=1e-15)
    assert radial_potential(ball, 0.0) == pytest.approx(1.35, rel=1e-15)
    for r in (0.1, 1.0, 7.0):
        assert radial_potential(C.point(0.3), r) == pytest.approx(0.3 / r, rel=1e-15)


def test_ball_interior_by_shell_quadrature():
    R, nu = 1.0, 0.9
    rho = lambda r: nu / (4 / 3 * math.pi * R**3) if r < R else 0.0
    from scipy.integrate import quad
    for r in (0.0, 0.3, 0.8):
        inner = radial_integral(rho, r) / r if r > 0 else 0.0
        outer = 4 * math.pi * quad(lambda s: rho(s) * s, r, R)[0]
        assert radial_potential(C.ball(nu, R), r) == pytest.approx(inner + outer, rel=1e-12)


def test_radial_potential_rejects_offcentre():
    with pytest.raises(MeasureError):
        radial_potential(C.point(0.3, (1, 0, 0)), 1.0)


def test_translate_and_scale_examples():
    moved = translate(C.point(0.5), (1, 0, 0))
    assert moved.atoms == (PointCharge((1.0, 0.0, 0.0), 0.5),)
    assert scale_mass(C.point(0.5), 1.5).atoms[0].weight == 0.75
    with pytest.raises(ScaleError):
        scale_mass(C.point(0.6), 2.0)


def test_atom_weight_bounds():
    for w in (0.0, 1.0, 1.2, -0.1):
        with pytest.raises(MeasureError):
            PointCharge((0, 0, 0), w)
    with pytest.raises(MeasureError):
        GaussianCharge((0, 0, 0), 0.3, 0.0)


def test_identical_atoms_merge_and_recheck_cap():
    mu = C.from_atoms([(0, 0, 0), (0, 0, 0)], [0.3, 0.4])
    assert len(mu.atoms) == 1 and mu.atoms[0].weight == pytest.approx(0.7)
    with pytest.raises(MeasureError):
        C.from_atoms([(0, 0, 0), (0, 0, 0)], [0.6, 0.5])


def test_json_roundtrip_and_field_names(tmp_path):
    mu = C.from_atoms([(0, 0, 0), (1, 2, 3)], [0.2, 0.3]) + C.cloud(0.1, 0.5, (0, 1, 0))
    d = mu.to_dict()
    assert set(d["atoms"][0]) == {"pos", "weight"}
    assert set(d["clouds"][0]) == {"pos", "weight", "sigma"}
    p = tmp_path / "m.json"
    p.write_text(json.dumps(d))
    assert load_measure(p) == mu


@pytest.mark.parametrize("bad", ['{"atoms": [{"pos": [0, 0]}]}', '{"atom": []}', "[1, 2]", "not json",
                                 '{"atoms": [{"pos": [0, 0, 0], "weight": 1.5}]}'])
def test_malformed_measure_files(tmp_path, bad):
    p = tmp_path / "bad.json"
    p.write_text(bad)
    with pytest.raises(MeasureError):
        load_measure(p)


def test_signed_parts():
    s = SignedChargeDistribution(C.point(0.4), C.point(0.3, (2, 0, 0)))
    assert (s.nu_plus, s.nu_minus) == (0.4, 0.3)


measures = st.builds(
    lambda atoms, clouds: C.from_atoms([p for p, _ in atoms], [w for _, w in atoms])
    + C(clouds=tuple(GaussianCharge(p, w, s) for p, w, s in clouds)),
    st.lists(st.tuples(point3, st.floats(0.01, 0.3)), min_size=0, max_size=3, unique_by=lambda t: t[0]),
    st.lists(st.tuples(point3, st.floats(0.01, 0.5), st.floats(0.1, 2.0)), min_size=0, max_size=2),
).filter(lambda m: total_mass(m) > 0)


@settings(max_examples=40, deadline=None)
@given(measures, point3)
def test_translation_covariance_exact(mu, a):
    x = np.array([7.1, -5.3, 6.7])
    assert potential(translate(mu, a), x + np.array(a)) == pytest.approx(potential(mu, x), rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(measures)
def test_far_field_monopole(mu):
    R = max(support_radius(mu), 1.0)
    x = np.array([1.0, 0.3, -0.2])
    x = 1e3 * R * x / np.linalg.norm(x)
    assert np.linalg.norm(x) * potential(mu, x) == pytest.approx(total_mass(mu), rel=1e-2)
    assert potential(mu, x) > 0


@settings(max_examples=30, deadline=None)
@given(measures)
def test_potential_decreasing_along_rays_outside_support(mu):
    R = support_radius(mu) + 1.0
    d = np.array([0.2, -0.5, 0.84])
    d /= np.linalg.norm(d)
    vals = potential(mu, np.outer(np.linspace(R, 20 * R, 30), d))
    assert np.all(np.diff(vals) < 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 3.0), st.floats(1e-3, 50.0))
def test_newton_bound_radial(nu, width, r):
    for mu in (C.ball(nu, width), C.cloud(nu, width)):
        assert radial_potential(mu, r) <= nu / r * (1 + 1e-14)


@settings(max_examples=30, deadline=None)
@given(measures, st.floats(0.1, 1.5))
def test_scale_mass_total(mu, t):
    if t * nu_max(mu) >= 1:
        with pytest.raises(ScaleError):
            scale_mass(mu, t)
    else:
        assert total_mass(scale_mass(mu, t)) == pytest.approx(t * total_mass(mu), rel=1e-14)
