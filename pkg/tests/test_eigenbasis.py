import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.special import spherical_jn

from ballspec.eigenbasis import (
    EigenTable,
    MultiIndex,
    build_eigentable,
    curl_eigenfunction,
    entry_field,
    evaluate_entries,
    grad_div_eigenfunction,
    neumann_scalar_eigenfunction,
    scalar_entry_field,
)
from ballspec.fieldgrid import (
    BallGrid,
    FDLattice,
    Stencil,
    fd_curl,
    fd_divergence,
    fd_gradient,
    fd_laplacian,
    grad_div_apply,
    rms,
)

RNG = np.random.default_rng(7)


def random_points(count, R=1.0, margin=0.1):
    r = R * RNG.uniform(0.2, 1.0, count)
    th = RNG.uniform(margin, math.pi - margin, count)
    ph = RNG.uniform(0, 2 * math.pi, count)
    return r, th, ph


# ---------------------------------------------------------------------------
# tables


def test_grad_div_table_cutoff_5():
    t = build_eigentable("grad_div", 1.0, 5.0)
    pairs = sorted({(e.index.n, e.index.m) for e in t.entries})
    assert pairs == [(0, 1), (1, 1), (2, 1), (3, 1)]
    assert len(t) == 16
    alpha = {(e.index.n, e.index.m): e.zero for e in t.entries}
    assert_allclose(alpha[(0, 1)], 4.4934094579, atol=1e-9)
    assert_allclose(alpha[(1, 1)], 2.0815759778, atol=1e-9)
    assert_allclose(alpha[(2, 1)], 3.3420936578, atol=1e-9)
    assert_allclose(alpha[(3, 1)], 4.5140996786, atol=1e-9)


def test_curl_table_cutoff_4():
    t = build_eigentable("curl", 1.0, 4.0)
    # rho_{1,1} = 4.493 > 4, so the table is empty below 4; at cutoff 6 it holds n = 1, 2
    assert len(t) == 0
    t6 = build_eigentable("curl", 1.0, 6.0)
    pairs = sorted({(e.index.n, e.index.m) for e in t6.entries})
    assert pairs == [(1, 1), (2, 1)]
    assert all(e.n >= 1 for e in t6.entries)
    # each mode appears with both signs
    assert len(t6) == 2 * (3 + 5)


def test_table_sorted_and_signed():
    t = build_eigentable("curl", 1.0, 12.0)
    mags = [abs(e.eigenvalue) for e in t.entries]
    assert mags == sorted(mags)
    plus = {(e.index, abs(e.eigenvalue)) for e in t.entries if e.family == "curl_plus"}
    minus = {(e.index, abs(e.eigenvalue)) for e in t.entries if e.family == "curl_minus"}
    assert plus == minus


def test_radius_scaling():
    t1 = build_eigentable("grad_div", 1.0, 10.0)
    t2 = build_eigentable("grad_div", 2.0, 10.0)
    assert_allclose([e.eigenvalue for e in t2.entries], [e.eigenvalue / 4 for e in t1.entries], rtol=1e-15)


@pytest.mark.parametrize("family", ["grad_div", "curl"])
def test_table_completeness(family):
    t = build_eigentable(family, 1.0, 20.0)
    for n in range(0 if family == "grad_div" else 1, 12):
        z = np.linspace(0.6 if family == "grad_div" else 1e-3, 20.0, 40000)
        f = spherical_jn(n, z, derivative=(family == "grad_div"))
        expected = np.count_nonzero(np.sign(f[1:]) != np.sign(f[:-1]))
        got = len({e.index.m for e in t.entries if e.n == n})
        assert got == expected


def test_eigenspaces_dimension():
    t = build_eigentable("grad_div", 1.0, 10.0)
    for (n, m), members in t.eigenspaces().items():
        assert len(members) == 2 * n + 1


def test_table_json_round_trip():
    t = build_eigentable("curl", 1.5, 9.0, nmax=3)
    d = t.to_dict()
    assert set(d) >= {"radius", "cutoff", "family", "entries"}
    assert set(d["entries"][0]) >= {"n", "m", "k", "eigenvalue", "norm_const"}
    back = EigenTable.from_dict(d)
    assert back == t


def test_restrict():
    t = build_eigentable("grad_div", 1.0, 12.0)
    r = t.restrict(6.0)
    assert all(e.zero < 6.0 for e in r.entries)
    assert len(r) == sum(e.zero < 6.0 for e in t.entries)


def test_invalid_multi_index():
    with pytest.raises(ValueError):
        MultiIndex(1, 0, 0)
    with pytest.raises(ValueError):
        MultiIndex(1, 1, 2)
    with pytest.raises(ValueError):
        curl_eigenfunction((0, 1, 0), "+", 1.0, (0.5, 1.0, 1.0))


def test_points_outside_ball_rejected():
    with pytest.raises(ValueError):
        grad_div_eigenfunction((1, 1, 0), 1.0, (1.5, 1.0, 1.0))
    with pytest.raises(ValueError):
        grad_div_eigenfunction((1, 1, 0), 1.0, (0.5, 0.0, 1.0))


# ---------------------------------------------------------------------------
# normalization and pointwise structure


@pytest.mark.parametrize("kappa", [(0, 1, 0), (1, 1, 0), (2, 2, -1), (3, 1, 3), (4, 2, 2)])
@pytest.mark.parametrize("R", [1.0, 1.7])
def test_scalar_norm_closed_form(kappa, R):
    n, m, k = kappa
    e = build_eigentable("grad_div", R, 30.0).entries
    alpha = next(x.zero for x in e if x.index == MultiIndex(n, m, k))
    # unit norm with orthonormal Y reduces to c^2 int psi_n(alpha r/R)^2 r^2 dr = 1
    val = neumann_scalar_eigenfunction(kappa, R, (np.array([0.4 * R]), np.array([1.0]), np.array([0.7])))
    c = val[0] / (spherical_jn(n, alpha * 0.4) * _y(n, k, 1.0, 0.7))
    integral = quad(lambda r: spherical_jn(n, alpha * r / R) ** 2 * r * r, 0, R, epsabs=1e-14, epsrel=1e-13)[0]
    assert_allclose(c * c * integral, 1.0, rtol=1e-10)


def _y(n, k, th, ph):
    from ballspec.specialfn import sph_harm

    return sph_harm(n, k, th, ph)


def test_l2_norms_by_quadrature():
    grid = BallGrid(1.0, 40, 24, 48)
    t = build_eigentable("grad_div", 1.0, 12.0, nmax=4)
    c = build_eigentable("curl", 1.0, 12.0, nmax=4)
    w = grid.weights
    for e in list(t.entries)[::5] + list(c.entries)[::5]:
        v = evaluate_entries([e], 1.0, grid.nodes)[0]
        assert_allclose(np.sum(w * np.sum(v * v, axis=0)), 1.0, atol=1e-8)


def test_scalar_orthogonality():
    grid = BallGrid(1.0, 40, 8, 4)
    g1 = neumann_scalar_eigenfunction((0, 1, 0), 1.0, grid.nodes)
    g2 = neumann_scalar_eigenfunction((0, 2, 0), 1.0, grid.nodes)
    assert abs(np.sum(grid.weights * g1 * g2)) <= 1e-8
    assert_allclose(np.sum(grid.weights * g1 * g1), 1.0, atol=1e-8)


def test_n0_gradient_is_radial():
    r, th, ph = random_points(20)
    q = grad_div_eigenfunction((0, 1, 0), 1.0, (r, th, ph))
    assert np.max(np.abs(q[1:])) == 0.0
    assert np.max(np.abs(q[0])) > 0.1


def test_plus_minus_orthogonal():
    grid = BallGrid(1.0, 40, 24, 48)
    up = curl_eigenfunction((1, 1, 0), "+", 1.0, grid.nodes)
    um = curl_eigenfunction((1, 1, 0), "-", 1.0, grid.nodes)
    assert abs(np.sum(grid.weights * np.sum(up * um, axis=0))) <= 1e-8


@pytest.mark.parametrize("family", ["grad_div", "curl"])
def test_boundary_normal_trace(family):
    t = build_eigentable(family, 1.3, 15.0, nmax=5)
    th = np.linspace(0.05, math.pi - 0.05, 17)
    ph = np.linspace(0, 2 * math.pi, 13)
    T, P = np.meshgrid(th, ph, indexing="ij")
    vals = evaluate_entries(t.entries, 1.3, (np.full_like(T, 1.3), T, P))
    assert np.max(np.abs(vals[:, 0])) <= 1e-10


def test_q_is_gradient_of_scalar():
    """grad g_kappa = q_kappa, with g normalized so that ||q|| = 1 (g scaled by 1/nu)."""
    t = build_eigentable("grad_div", 1.0, 10.0, nmax=3)
    lattice = FDLattice(1.0, 5, 5, 6, r_range=(0.3, 0.95))
    st = Stencil(step=1e-3)
    for e in t.entries:
        g = scalar_entry_field(e, 1.0)
        nu = math.sqrt(e.eigenvalue)
        q = lattice.evaluate(entry_field(e, 1.0))
        grad = lattice.evaluate(fd_gradient(g, st)) / nu
        assert np.max(np.abs(grad - q)) <= 1e-9 * max(1.0, nu**2) + 1e-9


def test_norm_identity_grad_g():
    """||grad g||^2 = nu^2 ||g||^2 with grad g from the fd oracle."""
    grid = BallGrid(1.0, 32, 16, 32)
    st = Stencil(step=1e-3)
    t = build_eigentable("grad_div", 1.0, 9.0, nmax=3)
    for e in t.entries[::3]:
        g = scalar_entry_field(e, 1.0)
        gv = g(*grid.nodes)
        dg = np.asarray(fd_gradient(g, st)(*grid.nodes))
        gg = np.sum(grid.weights * gv * gv)
        qq = np.sum(grid.weights * np.sum(dg * dg, axis=0))
        assert_allclose(gg, 1.0, atol=1e-9)
        assert_allclose(qq, e.eigenvalue * gg, rtol=1e-9)


# ---------------------------------------------------------------------------
# eigen-equations against the fd oracle


LATTICE = FDLattice(1.0, 5, 5, 6, r_range=(0.25, 0.95))
STENCIL = Stencil()


@pytest.mark.parametrize("kappa", [(0, 1, 0), (1, 1, 0), (1, 2, -1), (2, 1, 2), (3, 1, -3)])
def test_grad_div_eigen_equation(kappa):
    e = next(x for x in build_eigentable("grad_div", 1.0, 12.0).entries if x.index == MultiIndex(*kappa))
    f = entry_field(e, 1.0)
    q = LATTICE.evaluate(f)
    gd = LATTICE.evaluate(grad_div_apply(f, STENCIL))
    assert rms(-gd - e.eigenvalue * q) / (e.eigenvalue * rms(q)) <= 1e-6
    rot = LATTICE.evaluate(fd_curl(f, STENCIL))
    assert rms(rot) / (math.sqrt(e.eigenvalue) * rms(q)) <= 1e-6


@pytest.mark.parametrize("kappa", [(1, 1, 0), (2, 1, 1), (3, 2, -2)])
@pytest.mark.parametrize("sign", ["+", "-"])
def test_curl_eigen_equation(kappa, sign):
    fam = "curl_plus" if sign == "+" else "curl_minus"
    e = next(x for x in build_eigentable("curl", 1.0, 12.0).entries if x.index == MultiIndex(*kappa) and x.family == fam)
    f = entry_field(e, 1.0)
    u = LATTICE.evaluate(f)
    rot = LATTICE.evaluate(fd_curl(f, STENCIL))
    lam = abs(e.eigenvalue)
    assert rms(rot - e.eigenvalue * u) / (lam * rms(u)) <= 1e-6
    div = LATTICE.evaluate(fd_divergence(f, STENCIL))
    assert rms(div) / (lam * rms(u)) <= 1e-6
    assert (e.eigenvalue > 0) == (sign == "+")


def test_scalar_helmholtz_residual():
    e = next(x for x in build_eigentable("grad_div", 1.0, 12.0).entries if x.index == MultiIndex(0, 1, 0))
    g = scalar_entry_field(e, 1.0)
    lap = LATTICE.evaluate(fd_laplacian(g, STENCIL))
    val = LATTICE.evaluate(g)
    assert np.max(np.abs(-lap - e.eigenvalue * val)) <= 1e-8 * e.eigenvalue
