"""
grad div v + lambda v = f in the ball, n . v = 0 on the sphere, in coefficients.

In the combined basis the operator is diagonal: potential coefficients are
multiplied by (lambda - nu^2) and solenoidal ones by lambda.  Solving divides
by the same factors.  Resonances occur at lambda = 0 (the whole solenoidal
subspace is the kernel) and at lambda = nu^2_{n,m} (a (2n+1)-dimensional
kernel).  Resonant problems are solvable iff f has no component in the
kernel; the returned representative is the minimal-norm solution, i.e. the
kernel coefficients are set to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._io import dumps
from .decomposition import SpectralCoeffs
from .eigenbasis import EigenTable

__all__ = [
    "BvpSolution",
    "Resonance",
    "apply_forward",
    "homeomorphism_ratios",
    "operator_power",
    "solve",
    "stability_report",
]


def _check_lambda(lam) -> float:
    if isinstance(lam, complex) or np.iscomplexobj(lam):
        raise TypeError("lambda must be real")
    lam = float(lam)
    if not math.isfinite(lam):
        raise ValueError("lambda must be finite")
    return lam


def default_tol_res(lam: float) -> float:
    return 1e-9 * max(1.0, abs(lam))


@dataclass(frozen=True)
class Resonance:
    kind: str
    hit_pairs: tuple[tuple[int, int], ...] = ()
    kernel_dim: int = 0
    tol_res: float = 0.0

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hit_pairs": [list(p) for p in self.hit_pairs],
            "kernel_dim": self.kernel_dim,
            "tol_res": self.tol_res,
        }


def _resonance(c: SpectralCoeffs, lam: float, tol_res: float) -> tuple[Resonance, np.ndarray]:
    """Resonance record and the mask of potential entries in hit eigenspaces."""
    nu2 = c.nu2
    hit = np.abs(lam - nu2) <= tol_res
    if abs(lam) <= tol_res:
        return Resonance("lambda_zero", (), 2 * len(c.lam), tol_res), hit
    if hit.any():
        pairs = sorted({(e.index.n, e.index.m) for e, h in zip(c.potential_table.entries, hit) if h})
        return Resonance("eigen_hit", tuple(pairs), int(np.count_nonzero(hit)), tol_res), hit
    return Resonance("none", (), 0, tol_res), hit


def stability_report(lam: float, table: EigenTable, tol_res: float | None = None) -> dict:
    """Lambda = max 1/|lam - nu^2|, Pi = max nu^2/|lam - nu^2| and the spectral distance.

    Hit eigenvalues (within ``tol_res``) are left out of the maxima, so at a
    resonance the constants describe the complement of the kernel.  The maxima
    are only guaranteed to be attained inside the table when
    (cutoff/R)^2 > 2 lam; ``cutoff_ok`` reports that condition.
    """
    lam = _check_lambda(lam)
    tol_res = default_tol_res(lam) if tol_res is None else tol_res
    nu2 = np.unique(np.array([e.eigenvalue for e in table.entries]))
    if nu2.size == 0:
        raise ValueError("empty table")
    gap = np.abs(lam - nu2)
    keep = gap > tol_res
    Lam = float(np.max(1.0 / gap[keep])) if keep.any() else 0.0
    Pi = float(np.max(nu2[keep] / gap[keep])) if keep.any() else 0.0
    i = int(np.argmin(gap))
    return {
        "lambda": lam,
        "Lambda": Lam,
        "Pi": Pi,
        "nearest_eigenvalue": float(nu2[i]),
        "distance": float(gap[i]),
        "cutoff_ok": bool((table.cutoff / table.radius) ** 2 > 2.0 * lam),
    }


@dataclass(frozen=True)
class BvpSolution:
    v: SpectralCoeffs
    lam: float
    resonance: Resonance
    fredholm_defect: float
    solvable: bool
    violating: tuple[tuple[str, int, int, int, float], ...] = ()
    bounds: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def kernel(self) -> SpectralCoeffs:
        """Indicator coefficients of the kernel within the table (1 on kernel entries)."""
        c = self.v
        if self.resonance.kind == "lambda_zero":
            return c.replace(a=np.zeros_like(c.a), b_plus=np.ones_like(c.b_plus), b_minus=np.ones_like(c.b_minus))
        hit = np.abs(self.lam - c.nu2) <= self.resonance.tol_res
        return c.replace(a=hit.astype(float), b_plus=np.zeros_like(c.b_plus), b_minus=np.zeros_like(c.b_minus))

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "resonance": self.resonance.as_dict(),
            "solvable": self.solvable,
            "fredholm_defect": self.fredholm_defect,
            "violating": [
                {"family": fam, "n": n, "m": m, "k": k, "coefficient": val}
                for fam, n, m, k, val in self.violating
            ],
            "representative": "minimal_norm",
            "bounds": self.bounds,
            "residual_diagnostics": self.diagnostics,
            "solution": self.v.to_dict(),
        }

    def to_json(self) -> str:
        return dumps(self.as_dict())


def apply_forward(v: SpectralCoeffs, lam: float) -> SpectralCoeffs:
    """Coefficients of grad div v + lam v."""
    lam = _check_lambda(lam)
    return v.replace(a=(lam - v.nu2) * v.a, b_plus=lam * v.b_plus, b_minus=lam * v.b_minus)


def solve(
    f: SpectralCoeffs,
    lam: float,
    tol_res: float | None = None,
    tol: float | None = None,
) -> BvpSolution:
    """Solve grad div v + lam v = f with n . v = 0 in coefficient space.

    ``tol_res`` decides resonance (default 1e-9 max(1, |lam|)); ``tol`` is the
    solvability threshold on the kernel component of f (default
    1e-8 max(1, ||f||)).  Unsolvable problems are reported, never silently
    projected: ``solvable`` is False and ``violating`` lists the offending
    coefficients, while ``v`` holds the minimal-norm solution of the
    projected problem for inspection.
    """
    lam = _check_lambda(lam)
    tol_res = default_tol_res(lam) if tol_res is None else float(tol_res)
    fnorm = math.sqrt(f.norm_sq())
    tol = 1e-8 * max(1.0, fnorm) if tol is None else float(tol)
    res, hit = _resonance(f, lam, tol_res)

    denom = lam - f.nu2
    a = np.where(hit, 0.0, f.a / np.where(hit, 1.0, denom))
    violating: list[tuple[str, int, int, int, float]] = []
    if res.kind == "lambda_zero":
        bp = np.zeros_like(f.b_plus)
        bm = np.zeros_like(f.b_minus)
        for e, p, m in zip(f.solenoidal_table.modes(), f.b_plus, f.b_minus):
            i = e.index
            if abs(p) > tol:
                violating.append(("curl_plus", i.n, i.m, i.k, float(p)))
            if abs(m) > tol:
                violating.append(("curl_minus", i.n, i.m, i.k, float(m)))
        defect = math.sqrt(float(np.sum(f.b_plus**2) + np.sum(f.b_minus**2)))
    else:
        bp = f.b_plus / lam
        bm = f.b_minus / lam
        defect = 0.0
    if res.kind == "eigen_hit":
        for e, val, h in zip(f.potential_table.entries, f.a, hit):
            if h and abs(val) > tol:
                i = e.index
                violating.append(("grad_div", i.n, i.m, i.k, float(val)))
        defect = math.sqrt(float(np.sum(f.a[hit] ** 2)))
    solvable = defect <= tol
    v = f.replace(a=a, b_plus=bp, b_minus=bm)

    bounds = stability_report(lam, f.potential_table, tol_res)
    fA = math.sqrt(float(np.sum(f.a**2)))
    fB = math.sqrt(float(np.sum(f.b_plus**2) + np.sum(f.b_minus**2)))
    v1 = math.sqrt(float(np.sum(a**2)))
    v2 = math.sqrt(float(np.sum(bp**2) + np.sum(bm**2)))
    forward = apply_forward(v, lam)
    # residual on the solvable part of f: the kernel component cannot be matched
    target = f.replace(a=np.where(hit, 0.0, f.a))
    if res.kind == "lambda_zero":
        target = target.replace(b_plus=np.zeros_like(f.b_plus), b_minus=np.zeros_like(f.b_minus))
    diff = forward.replace(a=forward.a - target.a, b_plus=forward.b_plus - target.b_plus, b_minus=forward.b_minus - target.b_minus)
    diagnostics = {
        "coefficient_residual": math.sqrt(diff.norm_sq()),
        "norm_f_potential": fA,
        "norm_f_solenoidal": fB,
        "norm_v1": v1,
        "norm_v2": v2,
        "v1_over_fA": v1 / fA if fA > 0 else 0.0,
        "v2_over_fB": v2 / fB if fB > 0 else 0.0,
    }
    diagnostics.update(homeomorphism_ratios(f, v))
    return BvpSolution(v, lam, res, defect, solvable, tuple(violating), bounds, diagnostics)


def homeomorphism_ratios(f: SpectralCoeffs, v: SpectralCoeffs) -> dict:
    """Realized constants of the two-sided bounds between f and v.

    ||f||_{F0}^2 = ||f||^2 + sum lambda^4 (b+^2 + b-^2) and the H^2-type norm
    of v is taken as the graph norm ||v||^2 + sum nu^4 a^2 + sum lambda^4 b^2.
    Returns C1 = ||f||_{F0} / ||v||_{H2} and C0 = ||v||_{H2} / ||f||_{F0}.
    """
    lam4 = f.lam**4
    fF0 = math.sqrt(f.norm_sq() + float(np.sum(lam4 * (f.b_plus**2 + f.b_minus**2))))
    vH2 = math.sqrt(
        v.norm_sq() + float(np.sum(v.nu2**2 * v.a**2)) + float(np.sum(lam4 * (v.b_plus**2 + v.b_minus**2)))
    )
    return {
        "F0_norm_f": fF0,
        "H2_norm_v": vH2,
        "C1": fF0 / vH2 if vH2 > 0 else 0.0,
        "C0": vH2 / fF0 if fF0 > 0 else 0.0,
    }


def operator_power(c: SpectralCoeffs, p: int, tol: float = 1e-10) -> SpectralCoeffs:
    """Apply N_d^p with N_d = grad div restricted to potential fields: a -> (-nu^2)^p a.

    The solenoidal part must vanish (relative to ``tol`` times the norm).
    """
    if isinstance(p, bool) or int(p) != p or p == 0:
        raise ValueError("p must be a nonzero integer")
    p = int(p)
    sol = math.sqrt(float(np.sum(c.b_plus**2) + np.sum(c.b_minus**2)))
    if sol > tol * max(1.0, math.sqrt(c.norm_sq())):
        raise ValueError(f"operator powers act on potential fields; solenoidal norm is {sol:.3g}")
    return c.replace(a=(-c.nu2) ** p * c.a, b_plus=np.zeros_like(c.b_plus), b_minus=np.zeros_like(c.b_minus))
