"""
Fourier analysis and synthesis in the combined grad-div / curl eigenbasis.

Coefficients are full-grid quadrature inner products.  The quadrature is
evaluated separably (phi sums, then theta sums per harmonic, then radial sums
per eigenfunction), which gives the same numbers as forming every basis field
on the grid and calling :func:`ballspec.fieldgrid.inner_product`, only faster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._io import dumps
from .eigenbasis import (
    EigenEntry,
    EigenTable,
    MultiIndex,
    build_eigentable,
    evaluate_entries,
    neumann_norm_const,
    radial_profiles,
)
from .fieldgrid import BallGrid, GridMismatchError, ScalarField, VectorField, inner_product
from .specialfn import legendre_table, psi_all, sph_harm_all
from .specialfn import _trig

__all__ = [
    "SpectralCoeffs",
    "analyze",
    "build_tables",
    "neumann_potential",
    "parseval_report",
    "synthesize",
    "synthesize_potential",
    "synthesize_solenoidal",
    "weak_neumann_residual",
]


def build_tables(R: float, cutoff: float, nmax: int | None = None) -> tuple[EigenTable, EigenTable]:
    return (build_eigentable("grad_div", R, cutoff, nmax), build_eigentable("curl", R, cutoff, nmax))


class _Transform:
    """Separable quadrature transform between grid fields and basis coefficients."""

    def __init__(self, grid: BallGrid, entries: tuple[EigenEntry, ...]):
        self.grid = grid
        self.entries = entries
        self.nmax = max((e.n for e in entries), default=0)
        K = self.nmax
        self.P, self.dP = legendre_table(K, grid.theta)
        self.sin = np.sin(grid.theta)
        T = np.empty((2 * K + 1, grid.nphi))
        dT = np.empty_like(T)
        for k in range(-K, K + 1):
            T[k + K], dT[k + K] = _trig(k, grid.phi)
        self.T, self.dT = T, dT
        self.idx = np.array([e.n * e.n + e.n + e.index.k for e in entries], dtype=int)
        self.A, self.B, self.C = radial_profiles(entries, grid.R, grid.r)

    def _blocks(self):
        K = self.nmax
        for k in range(-K, K + 1):
            m = abs(k)
            ns = np.arange(m, K + 1)
            Pm = self.P[m:, m, :]
            yield k + K, ns * ns + ns + k, Pm, self.dP[m:, m, :], Pm / self.sin

    def angular_analysis(self, comps: np.ndarray):
        fr, ft, fp = comps
        W = self.grid.angular_weights
        Gr = np.einsum("ijl,kl->ikj", fr, self.T) * W
        GtT = np.einsum("ijl,kl->ikj", ft, self.T) * W
        GpT = np.einsum("ijl,kl->ikj", fp, self.T) * W
        GtD = np.einsum("ijl,kl->ikj", ft, self.dT) * W
        GpD = np.einsum("ijl,kl->ikj", fp, self.dT) * W
        size = (self.nmax + 1) ** 2
        nr = self.grid.nr
        Fr, Fs, Ft = (np.zeros((nr, size)) for _ in range(3))
        for kk, cols, Pm, dPm, Ps in self._blocks():
            Fr[:, cols] = Gr[:, kk] @ Pm.T
            Fs[:, cols] = GtT[:, kk] @ dPm.T + GpD[:, kk] @ Ps.T
            Ft[:, cols] = GpT[:, kk] @ dPm.T - GtD[:, kk] @ Ps.T
        return Fr, Fs, Ft

    def analyze(self, comps: np.ndarray) -> np.ndarray:
        Fr, Fs, Ft = self.angular_analysis(comps)
        wr = self.grid.radial_weights
        i = self.idx
        return (
            np.einsum("ei,ie,i->e", self.A, Fr[:, i], wr)
            + np.einsum("ei,ie,i->e", self.B, Fs[:, i], wr)
            + np.einsum("ei,ie,i->e", self.C, Ft[:, i], wr)
        )

    def angular_synthesis(self, Ar, As, At) -> np.ndarray:
        g = self.grid
        K = self.nmax
        Hr = np.zeros((g.nr, 2 * K + 1, g.ntheta))
        HsD, HsP, HtD, HtP = (np.zeros_like(Hr) for _ in range(4))
        for kk, cols, Pm, dPm, Ps in self._blocks():
            Hr[:, kk] = Ar[:, cols] @ Pm
            HsD[:, kk] = As[:, cols] @ dPm
            HsP[:, kk] = As[:, cols] @ Ps
            HtD[:, kk] = At[:, cols] @ dPm
            HtP[:, kk] = At[:, cols] @ Ps
        T, dT = self.T, self.dT
        fr = np.einsum("ikj,kl->ijl", Hr, T)
        ft = np.einsum("ikj,kl->ijl", HsD, T) - np.einsum("ikj,kl->ijl", HtP, dT)
        fp = np.einsum("ikj,kl->ijl", HsP, dT) + np.einsum("ikj,kl->ijl", HtD, T)
        return np.stack([fr, ft, fp])

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        size = (self.nmax + 1) ** 2
        nr = self.grid.nr
        out = []
        for prof in (self.A, self.B, self.C):
            acc = np.zeros((size, nr))
            np.add.at(acc, self.idx, coeffs[:, None] * prof)
            out.append(acc.T)
        return self.angular_synthesis(*out)


@lru_cache(maxsize=8)
def _transform(grid: BallGrid, entries: tuple[EigenEntry, ...]) -> _Transform:
    return _Transform(grid, entries)


@dataclass(frozen=True)
class SpectralCoeffs:
    """Coefficients of a field in the combined basis, truncated at ``cutoff``.

    ``a`` is aligned with ``potential_table.entries``; ``b_plus`` / ``b_minus``
    with ``solenoidal_table.modes()``.
    """

    potential_table: EigenTable
    solenoidal_table: EigenTable
    a: np.ndarray
    b_plus: np.ndarray
    b_minus: np.ndarray

    @property
    def cutoff(self) -> float:
        return self.potential_table.cutoff

    @property
    def radius(self) -> float:
        return self.potential_table.radius

    @property
    def nu2(self) -> np.ndarray:
        """nu_kappa^2 for each potential coefficient."""
        return np.array([e.eigenvalue for e in self.potential_table.entries])

    @property
    def lam(self) -> np.ndarray:
        """lambda_kappa > 0 for each solenoidal mode."""
        return np.array([e.eigenvalue for e in self.solenoidal_table.modes()])

    def replace(self, a=None, b_plus=None, b_minus=None) -> "SpectralCoeffs":
        return SpectralCoeffs(
            self.potential_table,
            self.solenoidal_table,
            np.array(self.a if a is None else a, dtype=float),
            np.array(self.b_plus if b_plus is None else b_plus, dtype=float),
            np.array(self.b_minus if b_minus is None else b_minus, dtype=float),
        )

    @classmethod
    def zeros(cls, tables: tuple[EigenTable, EigenTable]) -> "SpectralCoeffs":
        gt, ct = tables
        nm = len(ct.modes())
        return cls(gt, ct, np.zeros(len(gt)), np.zeros(nm), np.zeros(nm))

    def potential_part(self) -> "SpectralCoeffs":
        return self.replace(b_plus=np.zeros_like(self.b_plus), b_minus=np.zeros_like(self.b_minus))

    def solenoidal_part(self) -> "SpectralCoeffs":
        return self.replace(a=np.zeros_like(self.a))

    def restrict(self, cutoff: float) -> "SpectralCoeffs":
        """Nested truncation: keep coefficients whose zero lies below ``cutoff``."""
        gt = self.potential_table.restrict(cutoff)
        ct = self.solenoidal_table.restrict(cutoff)
        keep_a = np.array([e.zero < cutoff for e in self.potential_table.entries], dtype=bool)
        keep_b = np.array([e.zero < cutoff for e in self.solenoidal_table.modes()], dtype=bool)
        return SpectralCoeffs(gt, ct, self.a[keep_a], self.b_plus[keep_b], self.b_minus[keep_b])

    def dot(self, other: "SpectralCoeffs") -> float:
        """Coefficient-space L2 inner product."""
        return float(self.a @ other.a + self.b_plus @ other.b_plus + self.b_minus @ other.b_minus)

    def norm_sq(self) -> float:
        return self.dot(self)

    # basis views -----------------------------------------------------------

    def _vector(self, parts=("A", "B")):
        """All entries and the matching coefficient vector."""
        entries: list[EigenEntry] = []
        values: list[float] = []
        if "A" in parts:
            entries.extend(self.potential_table.entries)
            values.extend(self.a)
        if "B" in parts:
            pos = {e.index: i for i, e in enumerate(self.solenoidal_table.modes())}
            for e in self.solenoidal_table.entries:
                i = pos[e.index]
                entries.append(e)
                values.append(self.b_plus[i] if e.family == "curl_plus" else self.b_minus[i])
        return tuple(entries), np.array(values, dtype=float)

    def handle(self, parts=("A", "B")):
        """Analytic handle evaluating the truncated series anywhere (incl. slightly beyond R)."""
        entries, values = self._vector(parts)
        mask = values != 0.0
        entries = tuple(e for e, keep in zip(entries, mask) if keep)
        values = values[mask]
        R = self.radius

        def f(r, theta, phi):
            r, theta, phi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, theta, phi)))
            if not entries:
                return np.zeros((3,) + r.shape)
            return evaluate_entries(entries, R, (r, theta, phi), values, check=False)

        return f

    # serialisation ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "cutoff": self.cutoff,
            "potential": [
                {"n": e.index.n, "m": e.index.m, "k": e.index.k, "a": float(a)}
                for e, a in zip(self.potential_table.entries, self.a)
            ],
            "solenoidal": [
                {"n": e.index.n, "m": e.index.m, "k": e.index.k, "b_plus": float(bp), "b_minus": float(bm)}
                for e, bp, bm in zip(self.solenoidal_table.modes(), self.b_plus, self.b_minus)
            ],
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, tables: tuple[EigenTable, EigenTable] | None = None) -> "SpectralCoeffs":
        R = float(d.get("radius", 1.0))
        cutoff = float(d["cutoff"])
        out = cls.zeros(tables or build_tables(R, cutoff))
        pos_a = {e.index: i for i, e in enumerate(out.potential_table.entries)}
        pos_b = {e.index: i for i, e in enumerate(out.solenoidal_table.modes())}
        a, bp, bm = out.a.copy(), out.b_plus.copy(), out.b_minus.copy()
        try:
            for row in d.get("potential", []):
                a[pos_a[MultiIndex(row["n"], row["m"], row["k"])]] = row["a"]
            for row in d.get("solenoidal", []):
                i = pos_b[MultiIndex(row["n"], row["m"], row["k"])]
                bp[i], bm[i] = row["b_plus"], row["b_minus"]
        except KeyError as exc:
            raise ValueError(f"coefficient outside the table: {exc}") from exc
        return out.replace(a=a, b_plus=bp, b_minus=bm)


def analyze(f: VectorField, tables: tuple[EigenTable, EigenTable] | None = None, cutoff: float | None = None) -> SpectralCoeffs:
    """a_kappa = (f, q_kappa) and b_kappa^{+-} = (f, u_kappa^{+-}) by grid quadrature."""
    if tables is None:
        if cutoff is None:
            raise ValueError("give tables or a cutoff")
        tables = build_tables(f.grid.R, cutoff)
    gt, ct = tables
    if not math.isclose(gt.radius, f.grid.R) or not math.isclose(ct.radius, f.grid.R):
        raise GridMismatchError("table radius differs from grid radius")
    out = SpectralCoeffs.zeros(tables)
    entries, _ = out._vector()
    if not entries:
        return out
    coef = _transform(f.grid, entries).analyze(f.components)
    na = len(gt)
    a = coef[:na]
    pos = {e.index: i for i, e in enumerate(ct.modes())}
    bp, bm = out.b_plus.copy(), out.b_minus.copy()
    for e, c in zip(entries[na:], coef[na:]):
        if e.family == "curl_plus":
            bp[pos[e.index]] = c
        else:
            bm[pos[e.index]] = c
    return out.replace(a=a, b_plus=bp, b_minus=bm)


def synthesize(c: SpectralCoeffs, grid: BallGrid, parts=("A", "B")) -> VectorField:
    entries, values = c._vector(parts)
    if not entries:
        return VectorField(grid, np.zeros((3,) + grid.shape))
    return VectorField(grid, _transform(grid, entries).synthesize(values))


def synthesize_potential(c: SpectralCoeffs, grid: BallGrid) -> VectorField:
    """Partial sum S^0_N = sum a_kappa q_kappa on the grid."""
    return synthesize(c, grid, ("A",))


def synthesize_solenoidal(c: SpectralCoeffs, grid: BallGrid) -> VectorField:
    """Partial sum S^1_N = sum b^+ u^+ + b^- u^- on the grid."""
    return synthesize(c, grid, ("B",))


def neumann_potential(c: SpectralCoeffs, grid: BallGrid | None = None):
    """h = sum a_kappa g_kappa / nu_kappa, so grad h = S^0_N.

    Returns ``(ScalarField | None, handle)``; the handle evaluates h anywhere.
    """
    R = c.radius
    terms = [(e, a) for e, a in zip(c.potential_table.entries, c.a) if a != 0.0]
    nmax = max((e.n for e, _ in terms), default=0)

    def h(r, theta, phi):
        r, theta, phi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, theta, phi)))
        out = np.zeros(r.shape)
        if not terms:
            return out
        Y, _, _ = sph_harm_all(nmax, theta, phi)
        for e, a in terms:
            n, m, k = e.index.n, e.index.m, e.index.k
            nu = e.zero / R
            v = psi_all(n, nu * r, derivative=False)[n]
            out += a / nu * neumann_norm_const(n, m, R) * v * Y[n * n + n + k]
        return out

    field = ScalarField(grid, h(*grid.nodes)) if grid is not None else None
    return field, h


def weak_neumann_residual(c: SpectralCoeffs, f, div_f, test, grad_test, grid: BallGrid) -> float:
    """Green's-identity check of the Neumann data carried by grad h = S^0_N.

    For a smooth test function phi,
        int_S (n . f) phi dS = (grad h, grad phi) + (div f, phi)
    holds for the exact potential part; truncated series satisfy it up to the
    truncation error.  Pointwise normal derivatives of h vanish term by term,
    so only this weak form is meaningful.  Returns lhs - rhs.
    """
    surf = grid.surface()
    lhs = surf.integrate(surf.normal_trace(f) * test(*surf.nodes))
    nodes = grid.nodes
    S0 = synthesize_potential(c, grid)
    rhs = inner_product(S0, VectorField(grid, grad_test(*nodes)))
    rhs += inner_product(ScalarField(grid, div_f(*nodes)), ScalarField(grid, test(*nodes)))
    return float(lhs - rhs)


@dataclass(frozen=True)
class ParsevalReport:
    total: float
    potential_share: float
    solenoidal_share: float
    defect: float

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "potential_share": self.potential_share,
            "solenoidal_share": self.solenoidal_share,
            "defect": self.defect,
        }


def parseval_report(f: VectorField, c: SpectralCoeffs) -> ParsevalReport:
    total = inner_product(f, f)
    pa = float(np.sum(c.a**2))
    pb = float(np.sum(c.b_plus**2) + np.sum(c.b_minus**2))
    return ParsevalReport(total, pa, pb, total - pa - pb)
