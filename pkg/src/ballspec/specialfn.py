"""
Scalar special functions for the ball.

``psi(n, z)`` is the spherical Bessel-type function

    psi_n(z) = (-z)^n (d / z dz)^n (sin z / z),

i.e. the regular spherical Bessel function j_n.  Its positive zeros give the
curl eigenvalues and the zeros of its derivative give the Neumann / grad-div
eigenvalues.  Real orthonormal spherical harmonics and their angular
derivatives live here as well.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

__all__ = [
    "N_MAX",
    "Z_MAX",
    "ConvergenceError",
    "PsiEval",
    "ZeroTable",
    "find_zeros",
    "legendre_table",
    "psi",
    "psi_all",
    "psi_second_derivative",
    "sph_harm",
    "sph_harm_H",
    "sph_harm_all",
]

N_MAX = 32
Z_MAX = 200.0

# below this argument the power series is used for every order
_SERIES_LIMIT = 1.0


class ConvergenceError(RuntimeError):
    """A bracketed root did not converge within the iteration budget."""


@dataclass(frozen=True)
class PsiEval:
    n: int
    z: float
    value: float
    derivative: float


def _check_order(n: int, n_max: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 0 or n > n_max:
        raise ValueError(f"order n={n} outside [0, {n_max}]")


def _check_argument(z: np.ndarray, z_max: float) -> None:
    if np.any(~np.isfinite(z)) or np.any(z <= 0.0):
        raise ValueError("psi requires z > 0")
    if np.any(z > z_max):
        raise ValueError(f"psi argument exceeds Z_max={z_max}")


def _series(nmax: int, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Power series j_n(z) = z^n/(2n+1)!! sum_k (-z^2/2)^k / (k! (2n+3)...(2n+2k+1))."""
    vals = np.empty((nmax + 1,) + z.shape)
    ders = np.empty_like(vals)
    z2 = -0.5 * z * z
    lead = np.ones_like(z)  # z^n / (2n+1)!!
    for n in range(nmax + 1):
        if n > 0:
            lead = lead * z / (2 * n + 1)
        term = np.ones_like(z)
        total = np.ones_like(z)
        dtotal = np.zeros_like(z)  # d/dz of sum, divided by z
        for k in range(1, 30):
            term = term * z2 / (k * (2 * n + 2 * k + 1))
            total = total + term
            # d/dz (z^{2k}) = 2k z^{2k-1}
            dtotal = dtotal + 2 * k * term
            if np.all(np.abs(term) < 1e-18 * np.abs(total)):
                break
        vals[n] = lead * total
        # d/dz [lead * total] = n lead/z * total + lead * dtotal / z
        ders[n] = lead * (n * total + dtotal) / z
    return vals, ders


def _upward(nmax: int, z: np.ndarray) -> np.ndarray:
    out = np.empty((nmax + 1,) + z.shape)
    s, c = np.sin(z), np.cos(z)
    out[0] = s / z
    if nmax >= 1:
        out[1] = s / (z * z) - c / z
    for n in range(1, nmax):
        out[n + 1] = (2 * n + 1) / z * out[n] - out[n - 1]
    return out


def _miller(nmax: int, z: np.ndarray) -> np.ndarray:
    """Downward recurrence normalised against the closed forms of j_0, j_1 (nmax >= 1)."""
    out = np.zeros((nmax + 1,) + z.shape)
    zmax = float(np.max(z)) if z.size else 1.0
    top = int(max(nmax, zmax)) + 30 + int(math.sqrt(40.0 * max(nmax, zmax)))
    upper = np.zeros_like(z)
    cur = np.full_like(z, 1e-300)
    for k in range(top, 0, -1):
        # cur holds j_k, upper holds j_{k+1}; produce j_{k-1}
        lower = (2 * k + 1) / z * cur - upper
        upper, cur = cur, lower
        if k - 1 <= nmax:
            out[k - 1] = cur
        big = np.abs(cur) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            cur = cur * scale
            upper = upper * scale
            if k - 1 <= nmax:
                out[k - 1 :] *= scale
    s, c = np.sin(z), np.cos(z)
    j0 = s / z
    j1 = s / (z * z) - c / z
    use_j0 = np.abs(j0) >= np.abs(j1)
    ref = np.where(use_j0, j0, j1)
    raw = np.where(use_j0, out[0], out[1])
    out *= ref / raw
    out[0] = j0
    if nmax >= 1:
        out[1] = j1
    return out


def psi_all(nmax: int, z, *, derivative: bool = True, n_max: int = N_MAX, z_max: float = Z_MAX):
    """All orders 0..nmax of psi_n(z) (and psi_n'(z)) for an array of z.

    Returns arrays of shape ``(nmax + 1,) + z.shape``.
    """
    _check_order(nmax, n_max)
    z = np.asarray(z, dtype=float)
    _check_argument(z, z_max)
    vals = np.empty((nmax + 2,) + z.shape)
    ders = np.empty((nmax + 1,) + z.shape)

    small = z < _SERIES_LIMIT
    large = z >= nmax + 1
    middle = ~small & ~large
    if np.any(small):
        sv, sd = _series(nmax + 1, z[small])
        vals[:, small] = sv
        ders[:, small] = sd[: nmax + 1]
    if np.any(large):
        vals[:, large] = _upward(nmax + 1, z[large])
    if np.any(middle):
        vals[:, middle] = _miller(nmax + 1, z[middle])

    if not derivative:
        return vals[: nmax + 1]
    rest = ~small
    if np.any(rest):
        zz = z[rest]
        v = vals[:, rest]
        # psi_0' = -psi_1; psi_n' = psi_{n-1} - (n+1) psi_n / z
        ders[0, rest] = (zz * np.cos(zz) - np.sin(zz)) / (zz * zz)
        for n in range(1, nmax + 1):
            ders[n, rest] = v[n - 1] - (n + 1) * v[n] / zz
    return vals[: nmax + 1], ders


def psi(n: int, z, *, n_max: int = N_MAX, z_max: float = Z_MAX):
    """Value and derivative of psi_n at z (scalar or array).

    Raises ``ValueError`` for z <= 0, z > z_max or n outside [0, n_max].
    """
    _check_order(n, n_max)
    zz = np.asarray(z, dtype=float)
    vals, ders = psi_all(int(n), zz, n_max=n_max, z_max=z_max)
    v, d = vals[n], ders[n]
    if np.ndim(z) == 0:
        return float(v), float(d)
    return v, d


def psi_second_derivative(n: int, z, value=None, derivative=None):
    """psi_n'' from the spherical Bessel equation."""
    z = np.asarray(z, dtype=float)
    if value is None or derivative is None:
        value, derivative = psi(n, z)
    return -2.0 / z * derivative - (1.0 - n * (n + 1) / (z * z)) * value


# ---------------------------------------------------------------------------
# zeros


@dataclass(frozen=True)
class ZeroTable:
    kind: str
    entries: tuple[tuple[int, int, float], ...]
    bracket_width: float

    def zeros(self, n: int | None = None) -> np.ndarray:
        return np.array([z for (nn, _, z) in self.entries if n is None or nn == n])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "n", "m", "zero"])
        for n, m, z in self.entries:
            w.writerow([self.kind, n, m, f"{z:.17g}"])
        return buf.getvalue()


_KINDS = ("psi", "psi_prime")


def _target(kind: str, n: int):
    """Vectorised f and f' whose zeros are sought."""
    if kind == "psi":
        def f(x):
            return psi_all(n, x, derivative=False)[n]

        def df(x):
            return psi_all(n, x)[1][n]
    else:
        def f(x):
            return psi_all(n, x)[1][n]

        def df(x):
            v, d = psi_all(n, x)
            return psi_second_derivative(n, x, v[n], d[n])
    return f, df


def _scan_start(n: int) -> float:
    # psi_n vanishes to order n at 0 (psi_n' to order n-1, or is stationary
    # for n = 0); start past the region where it is numerically flat.
    return max(1e-3, 0.05 * n)


def _bisect(f, a: np.ndarray, b: np.ndarray, fa: np.ndarray, maxiter: int, xtol: float = 1e-13) -> np.ndarray:
    """Simultaneous bisection of sign-change brackets [a, b]."""
    a, b, fa = a.copy(), b.copy(), fa.copy()
    for _ in range(maxiter):
        width = b - a
        if np.all(width <= np.maximum(xtol, 4 * np.finfo(float).eps * b)):
            return 0.5 * (a + b)
        mid = 0.5 * (a + b)
        fm = f(mid)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, mid, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, mid)
    raise ConvergenceError(f"bisection did not reach {xtol} within {maxiter} iterations")


@lru_cache(maxsize=None)
def _zeros_cached(kind: str, n: int, count: int | None, cutoff: float | None, step: float, maxiter: int):
    f, df = _target(kind, n)
    start = _scan_start(n)
    if cutoff is not None:
        limit = cutoff
    else:
        # zeros are roughly pi apart past z ~ n; scan generously, extend if short
        limit = min(Z_MAX, n + 10.0 + math.pi * (count + 2))
    while True:
        grid = np.arange(start, limit, step)
        grid = np.append(grid, limit)
        vals = f(grid)
        exact = np.flatnonzero(vals == 0.0)
        brackets = np.flatnonzero(vals[:-1] * vals[1:] < 0.0)
        if count is None or brackets.size + exact.size >= count or limit >= Z_MAX:
            break
        limit = min(Z_MAX, 2.0 * limit)
    roots = list(grid[exact])
    if brackets.size:
        a, b = grid[brackets], grid[brackets + 1]
        mid = _bisect(f, a, b, vals[brackets], maxiter)
        slope = df(mid)
        fm = f(mid)
        with np.errstate(divide="ignore", invalid="ignore"):
            polished = mid - fm / slope
        ok = np.isfinite(polished) & (polished >= a) & (polished <= b)
        ok[ok] &= np.abs(f(polished[ok])) <= np.abs(fm[ok])
        roots.extend(np.where(ok, polished, mid))
    roots = sorted(float(z) for z in roots)
    if cutoff is not None:
        roots = [z for z in roots if z < cutoff]
    if count is not None:
        if len(roots) < count:
            raise ConvergenceError(f"only {len(roots)} zeros of {kind}_{n} found below Z_max={Z_MAX}")
        roots = roots[:count]
    return tuple(roots)


def find_zeros(
    kind: str,
    n: int,
    count: int | None = None,
    cutoff: float | None = None,
    *,
    step: float = np.pi / 8,
    maxiter: int = 200,
) -> ZeroTable:
    """Positive zeros of psi_n (``kind='psi'``) or psi_n' (``kind='psi_prime'``).

    Exactly one of ``count`` (first ``count`` zeros) or ``cutoff`` (all zeros
    below ``cutoff``) must be given.  Roots are bracketed by a sign-change scan
    with the given step, bisected to 1e-13 and polished by one Newton step
    (kept only if it stays in the bracket and reduces the residual).
    The trivial zero / stationary point at z = 0 is never reported.
    """
    kind = kind.replace("-", "_")
    if kind not in _KINDS:
        raise ValueError(f"unknown zero kind {kind!r}")
    _check_order(n, N_MAX)
    if (count is None) == (cutoff is None):
        raise ValueError("give exactly one of count or cutoff")
    if count is not None and count < 1:
        raise ValueError("count must be >= 1")
    if cutoff is not None and not cutoff > 0:
        raise ValueError("cutoff must be > 0")
    if cutoff is not None and cutoff > Z_MAX:
        raise ValueError(f"cutoff exceeds Z_max={Z_MAX}")
    zeros = _zeros_cached(kind, int(n), count, None if cutoff is None else float(cutoff), float(step), maxiter)
    entries = tuple((int(n), m + 1, z) for m, z in enumerate(zeros))
    return ZeroTable(kind=kind, entries=entries, bracket_width=float(step))


def merge_tables(tables: Iterable[ZeroTable]) -> ZeroTable:
    tables = list(tables)
    kinds = {t.kind for t in tables}
    if len(kinds) != 1:
        raise ValueError("cannot merge zero tables of different kinds")
    entries = tuple(e for t in tables for e in t.entries)
    return ZeroTable(kind=kinds.pop(), entries=entries, bracket_width=tables[0].bracket_width)


# ---------------------------------------------------------------------------
# spherical harmonics


def legendre_table(nmax: int, theta) -> tuple[np.ndarray, np.ndarray]:
    """Fully normalised associated Legendre functions and their theta-derivatives.

    Returns ``P[n, m, ...]`` and ``dP[n, m, ...]`` for 0 <= m <= n <= nmax,
    normalised so that ``2 pi * int P_n^m(cos t)^2 sin t dt = 1`` (m = 0) and
    half that for m > 0, which makes the real harmonics below orthonormal.
    No Condon-Shortley phase.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    s = np.sin(theta)
    P = np.zeros((nmax + 2, nmax + 2) + theta.shape)
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(1, nmax + 2):
        P[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, nmax + 1):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
        for n in range(m + 2, nmax + 2):
            a = math.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = math.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            P[n, m] = a * (x * P[n - 1, m] - b * P[n - 2, m])
    dP = np.zeros((nmax + 1, nmax + 1) + theta.shape)
    for n in range(nmax + 1):
        if n >= 1:
            dP[n, 0] = -math.sqrt(n * (n + 1.0)) * P[n, 1]
        for m in range(1, n + 1):
            up = math.sqrt((n - m) * (n + m + 1.0)) * P[n, m + 1] if m < n else 0.0
            dP[n, m] = 0.5 * (math.sqrt((n + m) * (n - m + 1.0)) * P[n, m - 1] - up)
    return P[: nmax + 1, : nmax + 1], dP


def _trig(k: int, phi):
    """Azimuthal factor of the real harmonic and its phi-derivative."""
    if k == 0:
        return np.ones_like(phi), np.zeros_like(phi)
    r2 = math.sqrt(2.0)
    if k > 0:
        return r2 * np.cos(k * phi), -r2 * k * np.sin(k * phi)
    a = -k
    return r2 * np.sin(a * phi), r2 * a * np.cos(a * phi)


def _check_nk(n: int, k: int) -> None:
    if n < 0 or abs(k) > n:
        raise ValueError(f"invalid harmonic indices n={n}, k={k}")


def sph_harm(n: int, k: int, theta, phi):
    """Real L2(S^2)-orthonormal spherical harmonic Y_n^k(theta, phi)."""
    _check_nk(n, k)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    P, _ = legendre_table(n, theta)
    t, _ = _trig(k, phi)
    out = P[n, abs(k)] * t
    return float(out) if out.ndim == 0 else out


def sph_harm_H(n: int, k: int, theta, phi):
    """(sin(theta)^-1 dY/dphi, dY/dtheta): real and imaginary parts of H Y_n^k."""
    _check_nk(n, k)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    s = np.sin(theta)
    if np.any(s <= 0.0) or np.any(theta <= 0.0) or np.any(theta >= math.pi):
        raise ValueError("H Y is evaluated only for theta in (0, pi)")
    P, dP = legendre_table(n, theta)
    t, dt = _trig(k, phi)
    h_phi = P[n, abs(k)] * dt / s
    h_theta = dP[n, abs(k)] * t
    if h_phi.ndim == 0:
        return float(h_phi), float(h_theta)
    return h_phi, h_theta


def sph_harm_all(nmax: int, theta, phi):
    """Y, dY/dtheta and (1/sin theta) dY/dphi for every (n, k) with n <= nmax.

    Arrays are indexed by ``n*n + n + k`` along the first axis.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    P, dP = legendre_table(nmax, theta)
    s = np.sin(theta)
    shape = np.broadcast(theta, phi).shape
    size = (nmax + 1) ** 2
    Y = np.empty((size,) + shape)
    Yt = np.empty_like(Y)
    Yp = np.empty_like(Y)
    for k in range(-nmax, nmax + 1):
        t, dt = _trig(k, phi)
        for n in range(abs(k), nmax + 1):
            i = n * n + n + k
            Y[i] = P[n, abs(k)] * t
            Yt[i] = dP[n, abs(k)] * t
            Yp[i] = P[n, abs(k)] * dt / s
    return Y, Yt, Yp
