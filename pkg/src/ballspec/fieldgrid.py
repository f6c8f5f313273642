"""
Quadrature over the ball, sampled fields, and finite-difference operators.

The finite-difference operators act on *callables* ``f(r, theta, phi)`` that
return either a scalar array or a ``(3, ...)`` array of spherical components
(v_r, v_theta, v_phi).  Each operator returns a new callable, so compositions
such as ``fd_gradient(fd_divergence(v))`` simply nest stencils.  Nothing here
uses the analytic derivatives of the eigenbasis; these operators are the
independent check on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

__all__ = [
    "DEFAULT_STEP",
    "BallGrid",
    "FDLattice",
    "GridMismatchError",
    "ResolutionError",
    "ScalarField",
    "Stencil",
    "SurfaceGrid",
    "VectorField",
    "cartesian_to_spherical",
    "fd_curl",
    "fd_divergence",
    "fd_gradient",
    "fd_laplacian",
    "fd_vector_laplacian",
    "grad_div_apply",
    "inner_product",
    "interpolant",
    "rms",
    "spherical_to_cartesian_vectors",
]

DEFAULT_STEP = 2e-3

Field = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class GridMismatchError(ValueError):
    pass


class ResolutionError(ValueError):
    """A stencil would reach a coordinate singularity or leave the sampled region."""


@dataclass(frozen=True)
class BallGrid:
    """Tensor Gauss-Legendre (r, theta) x uniform (phi) grid on the ball of radius R.

    Node arrays have shape ``(nr, ntheta, nphi)``.  The flat, exported node
    order runs r fastest, then theta, then phi (Fortran order of that shape).
    """

    R: float = 1.0
    nr: int = 48
    ntheta: int = 48
    nphi: int = 96

    def __post_init__(self):
        if self.R <= 0 or min(self.nr, self.ntheta, self.nphi) < 1:
            raise ValueError("grid sizes and radius must be positive")

    @cached_property
    def _rule(self):
        xr, wr = np.polynomial.legendre.leggauss(self.nr)
        xt, wt = np.polynomial.legendre.leggauss(self.ntheta)
        r = 0.5 * self.R * (xr + 1.0)
        wr = 0.5 * self.R * wr
        theta = 0.5 * math.pi * (xt + 1.0)
        wt = 0.5 * math.pi * wt
        phi = 2.0 * math.pi * np.arange(self.nphi) / self.nphi
        return r, wr, theta, wt, phi

    @property
    def r(self) -> np.ndarray:
        return self._rule[0]

    @property
    def theta(self) -> np.ndarray:
        return self._rule[2]

    @property
    def phi(self) -> np.ndarray:
        return self._rule[4]

    @property
    def radial_weights(self) -> np.ndarray:
        """w_i^r r_i^2."""
        return self._rule[1] * self.r**2

    @property
    def angular_weights(self) -> np.ndarray:
        """w_j^theta sin(theta_j) 2pi/nphi, shape (ntheta,)."""
        return self._rule[3] * np.sin(self.theta) * (2.0 * math.pi / self.nphi)

    @cached_property
    def weights(self) -> np.ndarray:
        w = self.radial_weights[:, None, None] * self.angular_weights[None, :, None]
        return np.broadcast_to(w, self.shape).copy()

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nr, self.ntheta, self.nphi)

    @property
    def size(self) -> int:
        return self.nr * self.ntheta * self.nphi

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.r, self.theta, self.phi, indexing="ij"))

    def flat_nodes(self) -> np.ndarray:
        """(size, 3) array of (r, theta, phi) in export order."""
        return np.stack([a.ravel(order="F") for a in self.nodes], axis=1)

    def surface(self) -> "SurfaceGrid":
        return SurfaceGrid(self.R, self.ntheta, self.nphi)

    def as_dict(self) -> dict:
        return {"R": self.R, "nr": self.nr, "ntheta": self.ntheta, "nphi": self.nphi}


@dataclass(frozen=True)
class SurfaceGrid:
    """Gauss-Legendre (theta) x uniform (phi) grid on the sphere r = R."""

    R: float = 1.0
    ntheta: int = 48
    nphi: int = 96

    @cached_property
    def _rule(self):
        xt, wt = np.polynomial.legendre.leggauss(self.ntheta)
        theta = 0.5 * math.pi * (xt + 1.0)
        wt = 0.5 * math.pi * wt
        phi = 2.0 * math.pi * np.arange(self.nphi) / self.nphi
        return theta, wt, phi

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        theta, _, phi = self._rule
        t, p = np.meshgrid(theta, phi, indexing="ij")
        return np.full_like(t, self.R), t, p

    @cached_property
    def weights(self) -> np.ndarray:
        theta, wt, _ = self._rule
        w = self.R**2 * wt * np.sin(theta) * (2.0 * math.pi / self.nphi)
        return np.broadcast_to(w[:, None], (self.ntheta, self.nphi)).copy()

    def normal_trace(self, v: Field) -> np.ndarray:
        """n . v on the surface nodes."""
        return np.asarray(v(*self.nodes))[0]

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))


@dataclass
class ScalarField:
    grid: BallGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)


@dataclass
class VectorField:
    grid: BallGrid
    components: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float).reshape((3,) + self.grid.shape)

    @classmethod
    def sample(cls, grid: BallGrid, f: Field) -> "VectorField":
        return cls(grid, np.asarray(f(*grid.nodes)))

    def __add__(self, other: "VectorField") -> "VectorField":
        _same_grid(self, other)
        return VectorField(self.grid, self.components + other.components)

    def __sub__(self, other: "VectorField") -> "VectorField":
        _same_grid(self, other)
        return VectorField(self.grid, self.components - other.components)

    def __mul__(self, scale: float) -> "VectorField":
        return VectorField(self.grid, scale * self.components)

    __rmul__ = __mul__

    def norm(self) -> float:
        return math.sqrt(max(inner_product(self, self), 0.0))

    def to_dict(self) -> dict:
        """Field file payload; component arrays flattened with r fastest, then theta, then phi."""
        names = ("v_r", "v_theta", "v_phi")
        return {
            "grid": self.grid.as_dict(),
            "components": {k: c.ravel(order="F").tolist() for k, c in zip(names, self.components)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VectorField":
        """Inverse of :meth:`to_dict`; also accepts the keys ntheta/nphi written with Greek letters."""
        try:
            g = d["grid"]
            grid = BallGrid(
                float(g["R"]),
                int(g["nr"]),
                int(g.get("ntheta", g.get("n\u03b8"))),
                int(g.get("nphi", g.get("n\u03c6"))),
            )
            comps = d["components"]
            arrays = [
                np.asarray(comps.get(k, comps.get(alt)), dtype=float)
                for k, alt in (("v_r", "v_r"), ("v_theta", "v_\u03b8"), ("v_phi", "v_\u03c6"))
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed field file: {exc}") from exc
        if any(a.shape != (grid.size,) for a in arrays):
            raise ValueError(f"each component needs {grid.size} values")
        return cls(grid, np.stack([a.reshape(grid.shape, order="F") for a in arrays]))


def _same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


def inner_product(a, b) -> float:
    """Quadrature approximation of the L2(B) inner product of two fields."""
    _same_grid(a, b)
    w = a.grid.weights
    if isinstance(a, VectorField) and isinstance(b, VectorField):
        return float(np.einsum("cijk,cijk,ijk->", a.components, b.components, w))
    if isinstance(a, ScalarField) and isinstance(b, ScalarField):
        return float(np.sum(a.values * b.values * w))
    raise TypeError("inner_product needs two scalar or two vector fields")


# ---------------------------------------------------------------------------
# coordinates


def cartesian_to_spherical(x, y, z):
    r = np.sqrt(x * x + y * y + z * z)
    theta = np.arctan2(np.sqrt(x * x + y * y), z)
    phi = np.mod(np.arctan2(y, x), 2.0 * math.pi)
    return r, theta, phi


def spherical_to_cartesian_vectors(theta, phi, v):
    """Rotate spherical components (3, ...) to Cartesian components (3, ...)."""
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    vr, vt, vp = v
    return np.stack([
        st * cp * vr + ct * cp * vt - sp * vp,
        st * sp * vr + ct * sp * vt + cp * vp,
        ct * vr - st * vt,
    ])


def cartesian_to_spherical_vectors(theta, phi, v):
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    vx, vy, vz = v
    return np.stack([
        st * cp * vx + st * sp * vy + ct * vz,
        ct * cp * vx + ct * sp * vy - st * vz,
        -sp * vx + cp * vy,
    ])


# ---------------------------------------------------------------------------
# finite differences

# 4th-order central first derivative
_CENTRAL = ((-2, 1.0 / 12), (-1, -8.0 / 12), (1, 8.0 / 12), (2, -1.0 / 12))
# 6th-order central first derivative, for deeply nested operators
_CENTRAL6 = ((-3, -1.0 / 60), (-2, 9.0 / 60), (-1, -45.0 / 60), (1, 45.0 / 60), (2, -9.0 / 60), (3, 1.0 / 60))
# 4th-order one-sided (backward) first derivative
_BACKWARD = ((0, 25.0 / 12), (-1, -48.0 / 12), (-2, 36.0 / 12), (-3, -16.0 / 12), (-4, 3.0 / 12))


@dataclass(frozen=True)
class Stencil:
    """Step control shared by the fd operators.

    ``step`` is used for r (length units) and for theta, phi (radians).  Near
    r = 0 and the polar axis the step shrinks so stencils never cross the
    singular set.  ``one_sided_r`` switches the radial stencil to a backward
    difference, for traces on r = R of fields that are only defined in the ball.
    ``order`` selects the 4th-order (default) or 6th-order central rule.
    """

    step: float = DEFAULT_STEP
    one_sided_r: bool = False
    r_max: float | None = None
    order: int = 4

    def __post_init__(self):
        if self.order not in (4, 6):
            raise ValueError("stencil order must be 4 or 6")


def _partial(f: Field, axis: int, st: Stencil) -> Field:
    def df(r, theta, phi):
        r, theta, phi = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r, theta, phi)))
        coords = [r, theta, phi]
        if axis == 0:
            h = np.minimum(st.step, r / 5.0)
        elif axis == 1:
            h = np.minimum(st.step, np.minimum(theta, math.pi - theta) / 5.0)
        else:
            h = np.full_like(r, st.step)
        if np.any(h <= 0):
            raise ResolutionError("stencil touches a coordinate singularity")
        rule = _CENTRAL if st.order == 4 else _CENTRAL6
        reach = 2 if st.order == 4 else 3
        if axis == 0 and st.one_sided_r:
            rule = _BACKWARD
        elif axis == 0 and st.r_max is not None and np.any(r + reach * h > st.r_max * (1 + 1e-12)):
            raise ResolutionError("radial stencil leaves the sampled region")
        # one call on all shifts stacked along a new leading point axis
        offs = np.array([o for o, _ in rule], dtype=float).reshape((-1,) + (1,) * r.ndim)
        wts = np.array([c for _, c in rule])
        shifted = [np.broadcast_to(c, (len(rule),) + r.shape) for c in coords]
        shifted[axis] = coords[axis] + offs * h
        vals = np.asarray(f(*shifted))
        lead = vals.ndim - r.ndim - 1
        acc = np.tensordot(wts, np.moveaxis(vals, lead, 0), axes=(0, 0))
        return acc / h

    return df


def fd_gradient(h: Field, stencil: Stencil | None = None) -> Field:
    """Spherical components of grad h."""
    st = stencil or Stencil()
    dr, dt, dp = (_partial(h, a, st) for a in range(3))

    def grad(r, theta, phi):
        return np.stack([dr(r, theta, phi), dt(r, theta, phi) / r, dp(r, theta, phi) / (r * np.sin(theta))])

    return grad


def fd_divergence(v: Field, stencil: Stencil | None = None) -> Field:
    st = stencil or Stencil()
    d_r = _partial(lambda r, t, p: r * r * np.asarray(v(r, t, p))[0], 0, st)
    d_t = _partial(lambda r, t, p: np.sin(t) * np.asarray(v(r, t, p))[1], 1, st)
    d_p = _partial(lambda r, t, p: np.asarray(v(r, t, p))[2], 2, st)

    def div(r, theta, phi):
        s = np.sin(theta)
        return d_r(r, theta, phi) / (r * r) + (d_t(r, theta, phi) + d_p(r, theta, phi)) / (r * s)

    return div


def fd_curl(v: Field, stencil: Stencil | None = None) -> Field:
    st = stencil or Stencil()
    dt_sin_vp = _partial(lambda r, t, p: np.sin(t) * np.asarray(v(r, t, p))[2], 1, st)
    dp_vt = _partial(lambda r, t, p: np.asarray(v(r, t, p))[1], 2, st)
    dp_vr = _partial(lambda r, t, p: np.asarray(v(r, t, p))[0], 2, st)
    dr_r_vp = _partial(lambda r, t, p: r * np.asarray(v(r, t, p))[2], 0, st)
    dr_r_vt = _partial(lambda r, t, p: r * np.asarray(v(r, t, p))[1], 0, st)
    dt_vr = _partial(lambda r, t, p: np.asarray(v(r, t, p))[0], 1, st)

    def curl(r, theta, phi):
        s = np.sin(theta)
        cr = (dt_sin_vp(r, theta, phi) - dp_vt(r, theta, phi)) / (r * s)
        ct = (dp_vr(r, theta, phi) / s - dr_r_vp(r, theta, phi)) / r
        cp = (dr_r_vt(r, theta, phi) - dt_vr(r, theta, phi)) / r
        return np.stack([cr, ct, cp])

    return curl


def fd_laplacian(h: Field, stencil: Stencil | None = None) -> Field:
    return fd_divergence(fd_gradient(h, stencil), stencil)


def fd_vector_laplacian(v: Field, stencil: Stencil | None = None) -> Field:
    """Componentwise Cartesian Laplacian, rotated back to spherical components.

    Independent of the identity -lap v = curl curl v - grad div v, which makes
    it a genuine cross-check of that identity.
    """
    st = stencil or Stencil()

    def cart(axis):
        def g(r, t, p):
            return spherical_to_cartesian_vectors(t, p, np.asarray(v(r, t, p)))[axis]
        return g

    laps = [fd_laplacian(cart(a), st) for a in range(3)]

    def lap(r, theta, phi):
        c = np.stack([L(r, theta, phi) for L in laps])
        return cartesian_to_spherical_vectors(theta, phi, c)

    return lap


def grad_div_apply(v: Field, stencil: Stencil | None = None) -> Field:
    """grad div v by composition of the fd gradient and divergence."""
    return fd_gradient(fd_divergence(v, stencil), stencil)


@dataclass(frozen=True)
class FDLattice:
    """Uniform (r, theta, phi) probe lattice for the fd oracle.

    The lattice keeps clear of r = 0 and the polar axis; fd residuals are
    reported on its points only.
    """

    R: float = 1.0
    nr: int = 6
    ntheta: int = 6
    nphi: int = 8
    r_range: tuple[float, float] = (0.2, 1.0)
    theta_margin: float = 0.2

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = self.R * np.linspace(*self.r_range, self.nr)
        t = np.linspace(self.theta_margin, math.pi - self.theta_margin, self.ntheta)
        p = 2.0 * math.pi * (np.arange(self.nphi) + 0.5) / self.nphi
        return tuple(np.meshgrid(r, t, p, indexing="ij"))

    def evaluate(self, f: Field) -> np.ndarray:
        return np.asarray(f(*self.nodes))


def rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(a))))


# ---------------------------------------------------------------------------
# sampled fields -> callables


def interpolant(v: VectorField | ScalarField) -> Field:
    """Cubic interpolant of a sampled field over the (r, theta, phi) nodes.

    Only used when no analytic handle exists; accuracy is limited by the grid
    and evaluations outside the node hull raise ``ResolutionError``.
    """
    g = v.grid
    phi = np.concatenate([g.phi[-3:] - 2 * math.pi, g.phi, g.phi[:3] + 2 * math.pi])

    def wrap(a):
        return np.concatenate([a[..., -3:], a, a[..., :3]], axis=-1)

    if isinstance(v, VectorField):
        data = [wrap(c) for c in v.components]
    else:
        data = [wrap(v.values)]
    interps = [RegularGridInterpolator((g.r, g.theta, phi), d, method="cubic") for d in data]

    def f(r, theta, phi_):
        r, theta, phi_ = np.broadcast_arrays(r, theta, np.mod(phi_, 2 * math.pi))
        pts = np.stack([r.ravel(), theta.ravel(), phi_.ravel()], axis=1)
        try:
            vals = [ip(pts).reshape(r.shape) for ip in interps]
        except ValueError as exc:
            raise ResolutionError(str(exc)) from exc
        return np.stack(vals) if len(vals) == 3 else vals[0]

    return f
