"""
Deterministic verification suites.

Each suite returns ``{"suite", "passed", "checks": [{"name", "value", "tol",
"passed"}]}``.  Random inputs use fixed seeds and no timing enters a report,
so repeated runs produce identical output.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import bvp, sobolev
from .decomposition import (
    SpectralCoeffs,
    analyze,
    build_tables,
    parseval_report,
    synthesize,
    synthesize_potential,
    synthesize_solenoidal,
)
from .eigenbasis import EigenEntry, EigenTable, entry_field, evaluate_entries
from .fieldgrid import (
    BallGrid,
    FDLattice,
    Stencil,
    VectorField,
    fd_curl,
    fd_divergence,
    grad_div_apply,
    inner_product,
    rms,
)
from .specialfn import find_zeros, psi
from .testfields import named_field, radial_field

__all__ = ["SUITES", "run_suite", "tan_root_bisection"]


def _check(name: str, value: float, tol: float, passed: bool | None = None) -> dict:
    value = float(value)
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "value": value, "tol": float(tol), "passed": ok}


def _result(suite: str, checks: list[dict]) -> dict:
    return {"suite": suite, "passed": all(c["passed"] for c in checks), "checks": checks}


def _tables(R: float, cutoff: float, nmax: int) -> tuple[EigenTable, EigenTable]:
    return build_tables(R, cutoff, nmax)


def _entries(tables) -> list[EigenEntry]:
    gt, ct = tables
    return list(gt.entries) + list(ct.entries)


# ---------------------------------------------------------------------------


def tan_root_bisection(lo: float = math.pi, hi: float = 1.5 * math.pi, tol: float = 1e-15) -> float:
    """Root of tan z = z on (pi, 3pi/2), as z cos z - sin z = 0, by plain bisection."""
    g = lambda z: z * math.cos(z) - math.sin(z)  # noqa: E731
    glo = g(lo)
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def suite_zeros(**_) -> dict:
    checks = []
    z = find_zeros("psi", 0, count=20).zeros(0)
    checks.append(_check("psi_0 zeros vs m pi (m <= 20), max abs error", np.max(np.abs(z - math.pi * np.arange(1, 21))), 1e-12))
    a = find_zeros("psi_prime", 0, count=1).zeros(0)[0]
    checks.append(_check("first psi_0' zero vs tan z = z bisection", abs(a - tan_root_bisection()), 1e-11))
    worst = 0.0
    for n in range(0, 9):
        for kind in ("psi", "psi_prime"):
            zs = find_zeros(kind, n, cutoff=40.0).zeros(n)
            v, d = psi(n, zs)
            worst = max(worst, float(np.max(np.abs(v if kind == "psi" else d))))
    checks.append(_check("residual at zeros, n <= 8, zeros < 40", worst, 1e-12))
    bad = 0
    for n in range(1, 9):
        p = find_zeros("psi", n, cutoff=40.0).zeros(n)
        q = find_zeros("psi_prime", n, cutoff=40.0).zeros(n)
        for lo, hi in zip(p[:-1], p[1:]):
            bad += int(np.count_nonzero((q > lo) & (q < hi)) != 1)
    checks.append(_check("interlacing violations, 1 <= n <= 8", bad, 0))
    return _result("zeros", checks)


def gram_matrix(entries, grid: BallGrid) -> np.ndarray:
    """Quadrature Gram matrix of basis fields, built from directly evaluated fields."""
    R = grid.R
    nodes = grid.nodes
    sw = np.sqrt(grid.weights)
    F = np.empty((len(entries), 3 * grid.size))
    for i in range(0, len(entries), 16):
        chunk = entries[i : i + 16]
        vals = evaluate_entries(chunk, R, nodes)
        F[i : i + len(chunk)] = (vals * sw).reshape(len(chunk), -1)
    return F @ F.T


def suite_orthonormality(*, nmax: int = 3, cutoff: float = 12.0, R: float = 1.0, **_) -> dict:
    tables = _tables(R, cutoff, nmax)
    entries = _entries(tables)
    G = gram_matrix(entries, BallGrid(R))
    dev = float(np.max(np.abs(G - np.eye(len(entries)))))
    checks = [
        _check(f"Gram deviation, {len(entries)} fields, n <= {nmax}, N = {cutoff:g}", dev, 1e-8),
    ]
    return _result("orthonormality", checks)


def _eigen_residuals(e: EigenEntry, R: float, lattice: FDLattice, st: Stencil) -> dict:
    f = entry_field(e, R)
    F = lattice.evaluate(f)
    scale = rms(np.sqrt(np.sum(F**2, axis=0)))
    ev = abs(e.eigenvalue)
    if e.family == "grad_div":
        eq = lattice.evaluate(grad_div_apply(f, st)) + e.eigenvalue * F
        other = lattice.evaluate(fd_curl(f, st))
        return {"eq": rms(eq) / (ev * scale), "aux": rms(other) / (math.sqrt(ev) * scale)}
    eq = lattice.evaluate(fd_curl(f, st)) - e.eigenvalue * F
    other = lattice.evaluate(fd_divergence(f, st))
    return {"eq": rms(eq) / (ev * scale), "aux": rms(other) / (ev * scale)}


def suite_eigen(*, nmax: int = 3, cutoff: float = 12.0, R: float = 1.0, **_) -> dict:
    tables = _tables(R, cutoff, nmax)
    lattice = FDLattice(R)
    worst = {"grad_div": [0.0, 0.0], "curl": [0.0, 0.0]}
    for e in _entries(tables):
        res = _eigen_residuals(e, R, lattice, Stencil())
        key = "grad_div" if e.family == "grad_div" else "curl"
        worst[key][0] = max(worst[key][0], res["eq"])
        worst[key][1] = max(worst[key][1], res["aux"])
    checks = [
        _check("max ||-grad div q - nu^2 q|| / nu^2", worst["grad_div"][0], 1e-6),
        _check("max ||rot q|| / nu", worst["grad_div"][1], 1e-6),
        _check("max ||rot u -+ lambda u|| / lambda", worst["curl"][0], 1e-6),
        _check("max ||div u|| / lambda", worst["curl"][1], 1e-6),
    ]
    # 4th-order check: halve a coarse step, residuals fall by about 2^4
    ratios = []
    for fam_table in tables:
        ents = fam_table.entries
        for e in (ents[0], ents[len(ents) // 2], ents[-1]):
            # below the r/5 and theta/5 caps on the lattice, so halving is uniform
            h = 0.03 * R / max(1.0, e.zero / 4.0)
            coarse = _eigen_residuals(e, R, lattice, Stencil(h))["eq"]
            fine = _eigen_residuals(e, R, lattice, Stencil(h / 2))["eq"]
            ratios.append(coarse / fine)
    lo = min(ratios)
    hi = max(ratios)
    checks.append(_check("refinement ratio min, must be >= 12 (expect ~16)", lo, 12.0, passed=lo >= 12.0))
    checks.append(_check("refinement ratio max (expect ~16)", hi, 20.0))
    return _result("eigen", checks)


def suite_boundary(*, nmax: int = 3, cutoff: float = 12.0, R: float = 1.0, **_) -> dict:
    gt, ct = _tables(R, cutoff, nmax)
    surf = BallGrid(R).surface()
    checks = []
    for name, table in (("q", gt), ("u", ct)):
        vals = evaluate_entries(table.entries, R, surf.nodes)
        checks.append(_check(f"max |n . {name}| on surface nodes", np.max(np.abs(vals[:, 0])), 1e-10))
    return _result("boundary", checks)


def suite_parseval(*, R: float = 1.0, **_) -> dict:
    grid = BallGrid(R)
    A = VectorField.sample(grid, named_field("bump-potential", R))
    B = VectorField.sample(grid, named_field("bump-solenoidal", R))
    f = A + B
    c = analyze(f, cutoff=30.0)
    checks = []
    SA = synthesize_potential(c, grid)
    SB = synthesize_solenoidal(c, grid)
    checks.append(_check("potential part relative L2 error, N = 30", (SA - A).norm() / A.norm(), 1e-4))
    checks.append(_check("solenoidal part relative L2 error, N = 30", (SB - B).norm() / B.norm(), 1e-4))
    defects = [parseval_report(f, c.restrict(N)).defect for N in (5, 10, 20, 30)]
    total = inner_product(f, f)
    increase = max(b - a for a, b in zip(defects[:-1], defects[1:]))
    checks.append(_check("Parseval defect increase over N in {5,10,20,30}", increase, 1e-12 * total))
    checks.append(_check("Parseval defect at N = 30 (>= -eps)", -defects[-1], 1e-10 * total))
    checks.append(_check("|(S0, S1)| / ||f||^2", abs(inner_product(SA, SB)) / total, 1e-8))
    # projection identity on a field in the span of a small table
    tables = build_tables(R, 8.0)
    rng = np.random.default_rng(7)
    z = SpectralCoeffs.zeros(tables)
    c0 = z.replace(a=rng.standard_normal(z.a.size), b_plus=rng.standard_normal(z.b_plus.size), b_minus=rng.standard_normal(z.b_minus.size))
    g = synthesize(c0, grid)
    c1 = analyze(g, tables)
    back = synthesize(c1, grid)
    checks.append(_check("round trip in table span, relative L2", (back - g).norm() / g.norm(), 1e-7))
    return _result("parseval", checks)


def _random_modes(tables, count: int, rng) -> SpectralCoeffs:
    z = SpectralCoeffs.zeros(tables)
    a, bp, bm = z.a.copy(), z.b_plus.copy(), z.b_minus.copy()
    slots = [("a", i) for i in range(a.size)] + [("p", i) for i in range(bp.size)] + [("m", i) for i in range(bm.size)]
    pick = rng.choice(len(slots), size=count, replace=False)
    for j in sorted(pick):
        kind, i = slots[j]
        val = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
        {"a": a, "p": bp, "m": bm}[kind][i] = val
    return z.replace(a=a, b_plus=bp, b_minus=bm)


def suite_bvp(*, nmax: int = 3, R: float = 1.0, **_) -> dict:
    tables = _tables(R, 10.0, nmax)
    rng = np.random.default_rng(11)
    f = _random_modes(tables, 10, rng)
    lam = 7.3 / R**2
    sol = bvp.solve(f, lam)
    checks = [_check("resonance kind is none", 0, 0, passed=sol.resonance.kind == "none")]
    lattice = FDLattice(R)
    vh = sol.v.handle()
    fh = f.handle()
    res = lattice.evaluate(grad_div_apply(vh)) + lam * lattice.evaluate(vh) - lattice.evaluate(fh)
    checks.append(_check("fd ||grad div v + lam v - f|| / ||f||", rms(res) / rms(lattice.evaluate(fh)), 1e-5))
    Lam = sol.bounds["Lambda"]
    checks.append(_check("||v1|| / ||f_A|| - Lambda", sol.diagnostics["v1_over_fA"] - Lam, 1e-12))
    fB = sol.diagnostics["norm_f_solenoidal"]
    checks.append(_check("| ||v2|| - ||f_B||/|lam| |", abs(sol.diagnostics["norm_v2"] - fB / abs(lam)), 1e-14 * max(1.0, fB)))
    grid = BallGrid(R)
    surf = grid.surface()
    checks.append(_check("max |n . v| on surface", np.max(np.abs(surf.normal_trace(vh))), 1e-8))
    # single-mode examples
    gt, ct = tables
    q = gt.entries[0]
    one = SpectralCoeffs.zeros(tables)
    fq = one.replace(a=np.eye(len(gt))[0])
    s1 = bvp.solve(fq, q.eigenvalue + 1.0)
    checks.append(_check("f = q, lam = nu^2 + 1 gives v = q", np.max(np.abs(s1.v.a - fq.a)), 1e-12))
    # random solves: ||v1|| <= Lambda ||f_A|| for many right-hand sides
    worst = -np.inf
    for _ in range(20):
        g = _random_modes(tables, 10, rng)
        sg = bvp.solve(g, lam)
        worst = max(worst, sg.diagnostics["v1_over_fA"] - sg.bounds["Lambda"])
    checks.append(_check("max over 20 solves of ||v1||/||f_A|| - Lambda", worst, 1e-10))
    # homeomorphism witness: realized constants are reported and finite
    checks.append(_check("realized C1 (||f||_F0 / ||v||_H2) finite", 0, 0, passed=math.isfinite(sol.diagnostics["C1"])))
    return _result("bvp", checks)


def suite_fredholm(*, R: float = 1.0, **_) -> dict:
    tables = _tables(R, 10.0, 4)
    gt, _ = tables
    z = SpectralCoeffs.zeros(tables)
    i0 = next(i for i, e in enumerate(gt.entries) if (e.index.n, e.index.m, e.index.k) == (1, 1, 0))
    nu2 = gt.entries[i0].eigenvalue
    f = z.replace(a=np.eye(len(gt))[i0])
    sol = bvp.solve(f, nu2)
    checks = [
        _check("lam = nu_11^2, f = q_110 is unsolvable", 0, 0, passed=not sol.solvable),
        _check("kernel_dim == 3", abs(sol.resonance.kernel_dim - 3), 0),
        _check("|fredholm_defect - 1|", abs(sol.fredholm_defect - 1.0), 1e-12),
    ]
    rng = np.random.default_rng(5)
    g = z.replace(a=rng.standard_normal(z.a.size), b_plus=rng.standard_normal(z.b_plus.size), b_minus=rng.standard_normal(z.b_minus.size))
    hit = np.abs(nu2 - g.nu2) <= bvp.default_tol_res(nu2)
    g_ok = g.replace(a=np.where(hit, 0.0, g.a))
    sol2 = bvp.solve(g_ok, nu2)
    checks.append(_check("after removing the kernel component the solve succeeds", sol2.fredholm_defect, 0, passed=sol2.solvable))
    base = bvp.apply_forward(sol2.v, nu2)
    worst = 0.0
    for _ in range(10):
        k = sol2.v.replace(a=sol2.v.a + np.where(hit, rng.standard_normal(hit.size), 0.0))
        fwd = bvp.apply_forward(k, nu2)
        diff = fwd.replace(a=fwd.a - g_ok.a, b_plus=fwd.b_plus - g_ok.b_plus, b_minus=fwd.b_minus - g_ok.b_minus)
        worst = max(worst, math.sqrt(diff.norm_sq()), float(np.max(np.abs(fwd.a - base.a))))
    checks.append(_check("forward residual with kernel added", worst, 1e-12))
    # lambda = 0: solvable iff f_B = 0
    fb = z.replace(b_plus=np.eye(z.b_plus.size)[0] * 0.75)
    s0 = bvp.solve(fb, 0.0)
    checks.append(_check("lam = 0 with b+ != 0 is unsolvable", 0, 0, passed=(not s0.solvable) and s0.resonance.kind == "lambda_zero"))
    checks.append(_check("lam = 0 defect equals |b+|", abs(s0.fredholm_defect - 0.75), 1e-15))
    return _result("fredholm", checks)


def suite_sobolev(*, R: float = 1.0, **_) -> dict:
    checks = []
    gt, ct = _tables(R, 12.0, 3)
    q = next(e for e in gt.entries if e.index.n == 2)
    u = next(e for e in ct.entries if e.index.n == 1 and e.family == "curl_plus")
    for s in (1, 2, 3, 4):
        rq = sobolev.membership_test(entry_field(q, R), s, "potential", R=R, cutoff=12.0)
        worst = max((t.relative for t in rq.trace_residuals), default=0.0)
        checks.append(_check(f"q_(2,1,{q.index.k}) in A^{s}_K (max trace residual)", worst, rq.tol, passed=rq.verdict))
        ru = sobolev.membership_test(entry_field(u, R), s, "solenoidal", R=R, cutoff=12.0)
        worst = max((t.relative for t in ru.trace_residuals), default=0.0)
        checks.append(_check(f"u+_(1,1,{u.index.k}) in V^{s}_R (max trace residual)", worst, ru.tol, passed=ru.verdict))
    rr = sobolev.membership_test(radial_field, 1, "potential", R=R, cutoff=30.0)
    checks.append(_check("2 r e_r not in A^1_K", 0, 0, passed=not rr.verdict))
    checks.append(_check("2 r e_r boundary residual - 2R", abs(rr.trace_residuals[0].max_abs - 2 * R), 1e-8))
    checks.append(_check("2 r e_r: s = 1 sums grow over the last octave", rr.increment, 0, passed=rr.increment > rr.rel_increment))
    for name, fam in (("bump-potential", "potential"), ("bump-solenoidal", "solenoidal")):
        rb = sobolev.membership_test(named_field(name, R), 1, fam, R=R, cutoff=30.0)
        checks.append(_check(f"{name}: s = 1 last-octave increment", rb.increment, rb.rel_increment, passed=rb.stable))
    return _result("sobolev", checks)


def suite_selfadjoint(*, R: float = 1.0, **_) -> dict:
    tables = _tables(R, 10.0, 4)
    rng = np.random.default_rng(3)
    z = SpectralCoeffs.zeros(tables)
    worst = 0.0
    for _ in range(100):
        u, v = (
            z.replace(a=rng.standard_normal(z.a.size), b_plus=rng.standard_normal(z.b_plus.size), b_minus=rng.standard_normal(z.b_minus.size))
            for _ in range(2)
        )
        lam = float(rng.uniform(-20, 20))
        lhs = bvp.apply_forward(u, lam).dot(v)
        rhs = u.dot(bvp.apply_forward(v, lam))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    checks = [_check("coefficient symmetry over 100 random pairs", worst, 1e-12)]
    # quadrature-space identity (grad div f, g) = (f, grad div g) = -sum nu^2 a(f) a(g)
    gt = tables[0]
    low = [i for i, e in enumerate(gt.entries) if e.index.n <= 2 and e.zero < 8.0]
    a_f, a_g = np.zeros(len(gt)), np.zeros(len(gt))
    a_f[low] = rng.standard_normal(len(low))
    a_g[low] = rng.standard_normal(len(low))
    cf, cg = z.replace(a=a_f), z.replace(a=a_g)
    grid = BallGrid(R, 16, 16, 32)
    F = VectorField.sample(grid, cf.handle())
    G = VectorField.sample(grid, cg.handle())
    DF = VectorField.sample(grid, grad_div_apply(cf.handle()))
    DG = VectorField.sample(grid, grad_div_apply(cg.handle()))
    coef = -float(np.sum(cf.nu2 * a_f * a_g))
    scale = math.sqrt(float(np.sum(cf.nu2**2 * a_f**2)) * float(np.sum(a_g**2)))
    checks.append(_check("|(grad div f, g) - coefficient form| / scale", abs(inner_product(DF, G) - coef) / scale, 1e-6))
    checks.append(_check("|(f, grad div g) - coefficient form| / scale", abs(inner_product(F, DG) - coef) / scale, 1e-6))
    return _result("selfadjoint", checks)


SUITES: dict[str, Callable[..., dict]] = {
    "zeros": suite_zeros,
    "orthonormality": suite_orthonormality,
    "eigen": suite_eigen,
    "boundary": suite_boundary,
    "parseval": suite_parseval,
    "bvp": suite_bvp,
    "fredholm": suite_fredholm,
    "sobolev": suite_sobolev,
    "selfadjoint": suite_selfadjoint,
}
ALIASES = {"helmholtz": "parseval"}


def run_suite(name: str, **params) -> dict:
    """Run one suite, or every suite for ``name == 'all'``."""
    name = ALIASES.get(name, name)
    if name == "all":
        results = [fn(**params) for fn in SUITES.values()]
        return {"suite": "all", "passed": all(r["passed"] for r in results), "suites": results}
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from all, {', '.join(SUITES)}") from None
    return fn(**params)
