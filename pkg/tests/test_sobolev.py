import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ballspec._io import loads
from ballspec.bvp import operator_power
from ballspec.decomposition import SpectralCoeffs, analyze, build_tables, parseval_report
from ballspec.eigenbasis import MultiIndex, entry_field
from ballspec.fieldgrid import BallGrid, VectorField
from ballspec.sobolev import (
    STOPPING_RULE,
    characteristic_wavenumber,
    efs_norms,
    extrapolated_normal_trace,
    fd_sobolev_norm_sq,
    membership_test,
    uniform_cauchy,
    weighted_norm,
)
from ballspec.testfields import PolyBump, named_field, radial_field

GRID = BallGrid()
TABLES = build_tables(1.0, 12.0)


def entry(table, n, m, k, family=None):
    return next(e for e in table.entries if e.index == MultiIndex(n, m, k) and (family is None or e.family == family))


def unit(tables, e):
    c = SpectralCoeffs.zeros(tables)
    if e.family == "grad_div":
        a = c.a.copy()
        a[tables[0].entries.index(e)] = 1.0
        return c.replace(a=a)
    j = [x.index for x in tables[1].modes()].index(e.index)
    b = c.b_plus.copy() if e.family == "curl_plus" else c.b_minus.copy()
    b[j] = 1.0
    return c.replace(b_plus=b) if e.family == "curl_plus" else c.replace(b_minus=b)


@pytest.fixture(scope="module")
def bump():
    h = named_field("bump-potential")
    f = VectorField.sample(GRID, h)
    return h, f, analyze(f, cutoff=30.0)


# ---------------------------------------------------------------------------
# weighted sums


def test_weighted_norm_single_mode():
    e = entry(TABLES[0], 2, 1, 0)
    c = unit(TABLES, e)
    assert_allclose(weighted_norm(c, 1), e.eigenvalue, rtol=1e-15)
    assert_allclose(weighted_norm(c, 3), e.eigenvalue**3, rtol=1e-14)
    assert weighted_norm(c, 1, "solenoidal") == 0.0


def test_weighted_norm_s0_is_parseval_share(bump):
    _, f, c = bump
    rep = parseval_report(f, c)
    assert weighted_norm(c, 0) == rep.potential_share
    assert_allclose(weighted_norm(c, 0, "solenoidal"), rep.solenoidal_share, rtol=1e-15)


def test_weighted_norm_monotone_in_cutoff(bump):
    _, _, c = bump
    for s in (0, 1, 2, 3):
        vals = [weighted_norm(c.restrict(N), s) for N in (5.0, 10.0, 20.0, 30.0)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_weighted_norm_rejects_bad_input():
    c = SpectralCoeffs.zeros(TABLES)
    with pytest.raises(ValueError):
        weighted_norm(c, -1)
    with pytest.raises(ValueError):
        weighted_norm(c, 1, "harmonic")


def test_characteristic_wavenumber():
    e = entry(TABLES[0], 1, 2, 0)
    assert_allclose(characteristic_wavenumber(unit(TABLES, e)), math.sqrt(e.eigenvalue), rtol=1e-15)
    assert characteristic_wavenumber(SpectralCoeffs.zeros(TABLES)) == 1.0


# ---------------------------------------------------------------------------
# membership


@pytest.mark.parametrize("s", [1, 2, 3, 4])
@pytest.mark.parametrize("kappa", [(1, 1, 0), (2, 2, -1)])
def test_eigenfield_is_member(s, kappa):
    e = entry(TABLES[0], *kappa)
    f = VectorField.sample(GRID, entry_field(e, 1.0))
    rep = membership_test(f, s, handle=entry_field(e, 1.0), coeffs=unit(TABLES, e))
    assert rep.verdict, rep.as_dict()
    assert rep.in_span
    assert len(rep.trace_residuals) == s // 2 + 1
    assert all(t.relative <= 1e-6 for t in rep.trace_residuals)


@pytest.mark.parametrize("s", [1, 2, 3])
def test_curl_eigenfield_is_member(s):
    e = entry(TABLES[1], 1, 1, 1, "curl_plus")
    h = entry_field(e, 1.0)
    rep = membership_test(VectorField.sample(GRID, h), s, "solenoidal", handle=h, coeffs=unit(TABLES, e))
    assert rep.verdict, rep.as_dict()
    assert [t.order for t in rep.trace_residuals] == list(range(s))


@pytest.mark.parametrize("R", [1.0, 1.5])
def test_radial_field_fails_with_trace_2R(R):
    h = lambda r, t, p: radial_field(r, t, p)  # noqa: E731
    rep = membership_test(h, 1, R=R, grid=BallGrid(R), cutoff=30.0)
    assert not rep.verdict
    assert not rep.traces_ok
    assert abs(rep.trace_residuals[0].max_abs - 2 * R) <= 1e-8
    # the s = 1 sums keep growing over the last octave
    assert not rep.stable
    assert rep.increment > 0.01


def test_radial_field_sums_grow_with_cutoff():
    c = analyze(VectorField.sample(GRID, radial_field), cutoff=30.0)
    vals = [weighted_norm(c.restrict(N), 1) for N in (5.0, 10.0, 20.0, 30.0)]
    assert all(b > 1.5 * a for a, b in zip(vals, vals[1:]))
    assert vals[-1] >= 4 * vals[1]


@pytest.mark.parametrize("s", [1, 2, 3])
def test_bump_is_member(bump, s):
    h, f, c = bump
    rep = membership_test(f, s, handle=h, coeffs=c)
    assert rep.verdict, rep.as_dict()
    assert rep.increment <= 0.01


@pytest.mark.xfail(
    strict=True,
    reason="C^7 polynomial bump at N = 30: last-octave increment of the s = 4 sum is about 2.3%, above the 1% rule",
)
def test_bump_is_member_s4(bump):
    h, f, c = bump
    assert membership_test(f, 4, handle=h, coeffs=c).verdict


def test_solenoidal_bump_is_member():
    h = named_field("bump-solenoidal")
    rep = membership_test(h, 2, "solenoidal", grid=GRID)
    assert rep.verdict, rep.as_dict()


def test_sampled_field_without_handle(bump):
    _, f, c = bump
    rep1 = membership_test(f, 1, coeffs=c)
    assert rep1.trace_residuals[0].method == "extrapolated"
    assert rep1.verdict
    rep2 = membership_test(f, 2, coeffs=c)
    assert rep2.resolution_insufficient
    assert not rep2.verdict


def test_extrapolated_trace_of_radial_field():
    trace = extrapolated_normal_trace(VectorField.sample(GRID, radial_field))
    assert_allclose(trace, 2.0, atol=1e-10)


def test_s0_has_no_traces(bump):
    h, f, c = bump
    rep = membership_test(f, 0, handle=h, coeffs=c)
    assert rep.trace_residuals == ()
    assert rep.verdict


def test_report_json(bump):
    h, f, c = bump
    d = loads(membership_test(f, 1, handle=h, coeffs=c).to_json())
    assert d["stopping_rule"]["rule"] == STOPPING_RULE
    assert set(d["stopping_rule"]["sums"]) == {"15", "30"}
    assert d["trace_residuals"][0]["operator"] == "(grad div)^0"
    assert d["verdict"] is True


def test_membership_rejects_bad_arguments(bump):
    _, f, c = bump
    with pytest.raises(ValueError):
        membership_test(f, -1, coeffs=c)
    with pytest.raises(ValueError):
        membership_test(f, 1, "harmonic", coeffs=c)


# ---------------------------------------------------------------------------
# E / F norms and fd Sobolev norms


def test_efs_single_modes():
    q = entry(TABLES[0], 1, 1, 0)
    u = entry(TABLES[1], 2, 1, 1, "curl_plus")
    fq = VectorField.sample(GRID, entry_field(q, 1.0))
    out = efs_norms(fq, unit(TABLES, q), handle=entry_field(q, 1.0))
    assert_allclose(out["E0_norm_sq"], 1 + q.eigenvalue, rtol=1e-8)
    assert out["boundary_trace"] <= 1e-10
    fu = VectorField.sample(GRID, entry_field(u, 1.0))
    out = efs_norms(fu, unit(TABLES, u))
    assert_allclose(out["F0_norm_sq"], 1 + u.eigenvalue**4, rtol=1e-8)


def test_efs_div_matches_fd(bump):
    h, f, c = bump
    out = efs_norms(f, c, handle=h)
    assert abs(math.sqrt(out["div_fA_sq"]) - math.sqrt(out["div_fd_sq"])) <= 1e-4 * math.sqrt(out["div_fd_sq"])


def test_fd_sobolev_norm_of_linear_field():
    # f = (x, 0, 0): ||f||^2 = 4pi/15, ||d f||^2 = 4pi/3, higher derivatives vanish
    def h(r, t, p):
        x = r * np.sin(t) * np.cos(p)
        return np.stack([x * np.sin(t) * np.cos(p), x * np.cos(t) * np.cos(p), -x * np.sin(p)])

    g = BallGrid(1.0, 16, 32, 64)
    assert_allclose(fd_sobolev_norm_sq(h, 0, grid=g), 4 * math.pi / 15, rtol=1e-10)
    assert_allclose(fd_sobolev_norm_sq(h, 2, grid=g), 4 * math.pi / 15 + 4 * math.pi / 3, rtol=1e-8)
    with pytest.raises(ValueError):
        fd_sobolev_norm_sq(h, 5)


def test_weighted_norm_bounded_by_fd_h2_norm(bump):
    """sum nu^4 a^2 <= C ||f||_{H^2}^2 with one constant across N.

    For f = grad b the sum is ||grad lap b||^2, and (d_j lap b)^2 <= 3 sum_i (d_j d_i d_i b)^2,
    so C = 3 is a valid bound.
    """
    h, _, c = bump
    h2 = fd_sobolev_norm_sq(h, 2)
    ratios = [weighted_norm(c.restrict(N), 2) / h2 for N in (10.0, 20.0, 30.0)]
    assert all(0 < r <= 3.0 for r in ratios)
    assert ratios[0] < ratios[1]
    assert ratios[2] / ratios[1] <= 1.05


def _smoothed_random(cutoff, p, seed=0):
    """N_d^p applied to bounded random potential coefficients."""
    c = SpectralCoeffs.zeros(build_tables(1.0, cutoff))
    rng = np.random.default_rng(seed)
    return operator_power(c.replace(a=rng.uniform(-1.0, 1.0, len(c.a))), p)


def test_uniform_convergence_for_smooth_member():
    """Partial sums of an A^6 member are sup-norm Cauchy between N = 20 and N = 30."""
    c = _smoothed_random(30.0, -3)
    assert uniform_cauchy(c, 20.0, 30.0) <= 1e-4


def test_uniform_convergence_bump_measured(bump):
    # the C^7 bump converges in sup norm, but too slowly for the 1e-4 Cauchy band at N = 20
    _, _, c = bump
    first, second = uniform_cauchy(c, 10.0, 20.0), uniform_cauchy(c, 20.0, 30.0)
    assert second < first / 10
    assert second <= 5e-3


def test_operator_power_output_is_s2_member():
    c = _smoothed_random(12.0, -2)
    h = c.handle()
    f = VectorField.sample(BallGrid(1.0, 24, 24, 48), h)
    rep = membership_test(f, 2, handle=h, coeffs=c)
    assert rep.verdict, rep.as_dict()


def test_polybump_derivatives_consistent():
    b = PolyBump((0.03, 0.02, -0.02))
    r, t, p = np.array([0.3, 0.5]), np.array([1.0, 2.0]), np.array([0.5, 4.0])
    g = b.gradient(r, t, p)
    hstep = 1e-6
    num = (b.value(r + hstep, t, p) - b.value(r - hstep, t, p)) / (2 * hstep)
    assert_allclose(g[0], num, atol=1e-7)
