"""
Eigenvalues and normalised eigenfunctions in the ball of radius R.

Three families are built here:

* g_kappa, Laplace-Neumann eigenfunctions  psi_n(alpha r / R) Y_n^k,
* q_kappa = grad g_kappa / nu, the grad-div eigenfields (-grad div q = nu^2 q),
* u_kappa^{+-}, curl eigenfields (curl u = +-lambda u) with lambda = rho / R.

Every vector basis field is stored in the separable form

    f = A(r) Y e_r + B(r) grad_S Y + C(r) e_r x grad_S Y,

with grad_S Y = (dY/dtheta, dY/dphi / sin theta) in (theta, phi) components.
The radial profiles (A, B, C) are returned by :func:`radial_profiles`; the
transforms in :mod:`ballspec.decomposition` only ever use this form.

The curl fields are built from the generating scalar chi = psi_n(lambda r) Y:
with T = curl(x chi) and P = curl(T) / lambda, u^{+-} = (P +- T) / norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._io import dumps
from .specialfn import N_MAX, find_zeros, psi, psi_all, sph_harm, sph_harm_all

__all__ = [
    "FAMILIES",
    "EigenEntry",
    "EigenTable",
    "MultiIndex",
    "build_eigentable",
    "curl_eigenfunction",
    "grad_div_eigenfunction",
    "neumann_norm_const",
    "curl_norm_const",
    "entry_field",
    "evaluate_entries",
    "scalar_entry_field",
    "neumann_scalar_eigenfunction",
    "radial_profiles",
    "zero_of",
]

FAMILIES = ("grad_div", "curl_plus", "curl_minus")


@dataclass(frozen=True, order=True)
class MultiIndex:
    n: int
    m: int
    k: int

    def __post_init__(self):
        if self.n < 0 or self.m < 1 or abs(self.k) > self.n:
            raise ValueError(f"invalid multi-index {self}")


@dataclass(frozen=True)
class EigenEntry:
    index: MultiIndex
    family: str
    eigenvalue: float
    zero: float
    norm_const: float

    @property
    def n(self) -> int:
        return self.index.n

    @property
    def sign(self) -> int:
        return {"grad_div": 0, "curl_plus": 1, "curl_minus": -1}[self.family]


def _kind(family: str) -> str:
    return "psi_prime" if family == "grad_div" else "psi"


_ZEROS: dict[tuple[str, int, int], float] = {}


def zero_of(family: str, n: int, m: int) -> float:
    """alpha_{n,m} (grad_div) or rho_{n,m} (curl families)."""
    key = (_kind(family), n, m)
    if key not in _ZEROS:
        for nn, mm, z in find_zeros(key[0], n, count=m).entries:
            _ZEROS.setdefault((key[0], nn, mm), z)
    return _ZEROS[key]


def _radial_integral(n: int, zero: float, R: float) -> float:
    """int_0^R psi_n(zero r / R)^2 r^2 dr by Gauss-Legendre."""
    npts = 48 + 2 * int(math.ceil(zero))
    x, w = np.polynomial.legendre.leggauss(npts)
    r = 0.5 * R * (x + 1.0)
    v, _ = psi(n, zero * r / R)
    return float(0.5 * R * np.sum(w * v * v * r * r))


@lru_cache(maxsize=None)
def neumann_norm_const(n: int, m: int, R: float) -> float:
    """c such that c psi_n(alpha r/R) Y_n^k has unit L2(B) norm."""
    return 1.0 / math.sqrt(_radial_integral(n, zero_of("grad_div", n, m), R))


@lru_cache(maxsize=None)
def curl_norm_const(n: int, m: int, R: float) -> float:
    """Normalisation of P +- T; ||T||^2 = ||P||^2 = n(n+1) int psi^2 r^2 dr."""
    if n < 1:
        raise ValueError("curl eigenfields need n >= 1")
    return 1.0 / math.sqrt(2.0 * n * (n + 1) * _radial_integral(n, zero_of("curl_plus", n, m), R))


def _entry(family: str, n: int, m: int, k: int, R: float, z: float | None = None) -> EigenEntry:
    if z is None:
        z = zero_of(family, n, m)
    if family == "grad_div":
        nu = z / R
        c = neumann_norm_const(n, m, R) / nu
        return EigenEntry(MultiIndex(n, m, k), family, nu * nu, z, c)
    sign = 1.0 if family == "curl_plus" else -1.0
    return EigenEntry(MultiIndex(n, m, k), family, sign * z / R, z, curl_norm_const(n, m, R))


@dataclass(frozen=True)
class EigenTable:
    """Immutable, complete table of eigen-entries with zero below ``cutoff``.

    ``family`` is ``'grad_div'`` or ``'curl'``; a curl table holds both signs.
    """

    radius: float
    cutoff: float
    family: str
    entries: tuple[EigenEntry, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def nmax(self) -> int:
        return max((e.n for e in self.entries), default=0)

    def modes(self) -> list[EigenEntry]:
        """One entry per multi-index (the + member for curl tables)."""
        if self.family == "grad_div":
            return list(self.entries)
        return [e for e in self.entries if e.family == "curl_plus"]

    def eigenspaces(self) -> dict[tuple[int, int], list[EigenEntry]]:
        """Entries grouped by (n, m); each group spans a (2n+1)-dim eigenspace per family."""
        groups: dict[tuple[int, int], list[EigenEntry]] = {}
        for e in self.modes():
            groups.setdefault((e.index.n, e.index.m), []).append(e)
        return groups

    def restrict(self, cutoff: float) -> "EigenTable":
        if cutoff > self.cutoff:
            raise ValueError("cannot extend a table by restriction")
        kept = tuple(e for e in self.entries if e.zero < cutoff)
        return EigenTable(self.radius, cutoff, self.family, kept)

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "cutoff": self.cutoff,
            "family": self.family,
            "entries": [
                {
                    "n": e.index.n,
                    "m": e.index.m,
                    "k": e.index.k,
                    "family": e.family,
                    "eigenvalue": e.eigenvalue,
                    "norm_const": e.norm_const,
                    "zero": e.zero,
                    "zero_of": _kind(e.family),
                }
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EigenTable":
        R = float(d["radius"])
        family = d["family"]
        entries = []
        for e in d["entries"]:
            fam = e.get("family", family)
            entries.append(_entry(fam, int(e["n"]), int(e["m"]), int(e["k"]), R))
        return cls(R, float(d["cutoff"]), family, tuple(entries))


def _sort_key(e: EigenEntry):
    return (abs(e.eigenvalue), e.index.n, e.index.m, e.index.k, -e.sign)


def build_eigentable(family: str, R: float = 1.0, cutoff: float = 10.0, nmax: int | None = None) -> EigenTable:
    """All entries whose zero (alpha or rho) lies below ``cutoff``.

    ``family`` is ``'grad_div'`` or ``'curl'``.  ``nmax`` optionally caps the
    degree (the table is then complete only for n <= nmax).
    """
    if family not in ("grad_div", "curl"):
        raise ValueError(f"unknown family {family!r}")
    if R <= 0 or cutoff <= 0:
        raise ValueError("radius and cutoff must be positive")
    kind = _kind("grad_div" if family == "grad_div" else "curl_plus")
    top = N_MAX if nmax is None else min(nmax, N_MAX)
    entries: list[EigenEntry] = []
    n = 0 if family == "grad_div" else 1
    while n <= top:
        zs = find_zeros(kind, n, cutoff=cutoff).zeros()
        if zs.size == 0:
            # first zero of psi_n / psi_n' increases with n
            break
        for m, z in enumerate(zs, start=1):
            _ZEROS.setdefault((kind, n, m), float(z))
            for k in range(-n, n + 1):
                if family == "grad_div":
                    entries.append(_entry("grad_div", n, m, k, R, z))
                else:
                    entries.append(_entry("curl_plus", n, m, k, R, z))
                    entries.append(_entry("curl_minus", n, m, k, R, z))
        n += 1
    else:
        if nmax is None and find_zeros(kind, N_MAX, cutoff=cutoff).zeros().size:
            raise ValueError(f"cutoff {cutoff} needs degrees beyond N_MAX={N_MAX}")
    entries.sort(key=_sort_key)
    return EigenTable(float(R), float(cutoff), family, tuple(entries))


# ---------------------------------------------------------------------------
# radial profiles and pointwise evaluation


def radial_profiles(entries, R: float, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Radial factors (A, B, C) for each entry at radii ``r``; shape (len, len(r))."""
    entries = list(entries)
    r = np.asarray(r, dtype=float)
    A = np.zeros((len(entries),) + r.shape)
    B = np.zeros_like(A)
    C = np.zeros_like(A)
    cache: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}
    for i, e in enumerate(entries):
        n, z = e.n, e.zero
        key = (n, z)
        if key not in cache:
            vals, ders = psi_all(n, z * r / R)
            cache[key] = (vals[n], ders[n])
        j, dj = cache[key]
        scale = z / R
        x = scale * r
        c = e.norm_const
        if e.family == "grad_div":
            A[i] = c * scale * dj
            B[i] = c * j / r
        else:
            A[i] = c * n * (n + 1) * j / (scale * r)
            B[i] = c * (j + x * dj) / (scale * r)
            C[i] = -e.sign * c * j
    return A, B, C


def _assemble(A, B, C, Y, Yt, Yp):
    return np.stack([A * Y, B * Yt - C * Yp, B * Yp + C * Yt])


def _points(point):
    r, theta, phi = (np.asarray(a, dtype=float) for a in point)
    return np.broadcast_arrays(r, theta, phi)


def _check_point(r, theta, R):
    if np.any(r <= 0) or np.any(r > R * (1 + 1e-12)):
        raise ValueError("points must satisfy 0 < r <= R")
    if np.any(theta <= 0) or np.any(theta >= math.pi):
        raise ValueError("theta must lie strictly inside (0, pi)")


def evaluate_entries(entries, R: float, point, coeffs=None, *, check: bool = True) -> np.ndarray:
    """Sum_e coeffs[e] * field_e at the given points, shape (3, ...).

    With ``coeffs=None`` the fields are returned individually, shape (len, 3, ...).
    ``check=False`` allows r slightly outside the ball (used by fd stencils).
    """
    entries = list(entries)
    r, theta, phi = _points(point)
    if check:
        _check_point(r, theta, R)
    shape = r.shape
    nmax = max((e.n for e in entries), default=0)
    rf, tf, pf = r.ravel(), theta.ravel(), phi.ravel()
    Y, Yt, Yp = sph_harm_all(nmax, tf, pf)
    A, B, C = radial_profiles(entries, R, rf)
    idx = np.array([e.n * e.n + e.n + e.index.k for e in entries], dtype=int)
    if coeffs is None:
        out = _assemble(A, B, C, Y[idx], Yt[idx], Yp[idx])
        return np.moveaxis(out, 0, 1).reshape((len(entries), 3) + shape)
    coeffs = np.asarray(coeffs, dtype=float)
    # accumulate per (n, k) to keep the angular work at one harmonic per pair
    acc = np.zeros((3, Y.shape[0], rf.size))
    np.add.at(acc[0], idx, coeffs[:, None] * A)
    np.add.at(acc[1], idx, coeffs[:, None] * B)
    np.add.at(acc[2], idx, coeffs[:, None] * C)
    used = np.unique(idx)
    out = _assemble(acc[0, used], acc[1, used], acc[2, used], Y[used], Yt[used], Yp[used]).sum(axis=1)
    return out.reshape((3,) + shape)


def _lookup(family: str, kappa, R: float) -> EigenEntry:
    if not isinstance(kappa, MultiIndex):
        kappa = MultiIndex(*kappa)
    if family != "grad_div" and kappa.n == 0:
        raise ValueError("curl eigenfields with n = 0 vanish identically")
    return _entry(family, kappa.n, kappa.m, kappa.k, R)


def neumann_scalar_eigenfunction(kappa, R: float, point) -> np.ndarray:
    """Unit-norm Laplace-Neumann eigenfunction g_kappa at (r, theta, phi)."""
    e = _lookup("grad_div", kappa, R)
    r, theta, phi = _points(point)
    if np.any(r <= 0) or np.any(r > R * (1 + 1e-12)):
        raise ValueError("points must satisfy 0 < r <= R")
    n, m, k = e.index.n, e.index.m, e.index.k
    v, _ = psi(n, e.zero * r / R) if r.ndim else psi(n, float(e.zero * r / R))
    return neumann_norm_const(n, m, R) * np.asarray(v) * sph_harm(n, k, theta, phi)


def grad_div_eigenfunction(kappa, R: float, point) -> np.ndarray:
    """(q_r, q_theta, q_phi) of the unit-norm grad-div eigenfield q_kappa."""
    e = _lookup("grad_div", kappa, R)
    return evaluate_entries([e], R, point)[0]


def curl_eigenfunction(kappa, sign: int | str, R: float, point) -> np.ndarray:
    """(u_r, u_theta, u_phi) of the unit-norm curl eigenfield u_kappa^{+-}."""
    if sign in (1, "+", "plus"):
        family = "curl_plus"
    elif sign in (-1, "-", "minus"):
        family = "curl_minus"
    else:
        raise ValueError(f"bad sign {sign!r}")
    e = _lookup(family, kappa, R)
    return evaluate_entries([e], R, point)[0]


def entry_field(entry: EigenEntry, R: float):
    """Analytic handle f(r, theta, phi) for one entry (valid slightly beyond R)."""

    def f(r, theta, phi):
        return evaluate_entries([entry], R, (r, theta, phi), check=False)[0]

    return f


def scalar_entry_field(entry: EigenEntry, R: float):
    """Analytic handle for the unit-norm scalar g of a grad_div entry."""
    n, m, k = entry.index.n, entry.index.m, entry.index.k
    c = neumann_norm_const(n, m, R)

    def g(r, theta, phi):
        r, theta, phi = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r, theta, phi)))
        v, _ = psi_all(n, entry.zero * r / R)
        return c * v[n] * sph_harm(n, k, theta, phi)

    return g
