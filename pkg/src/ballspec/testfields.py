"""
Analytic test fields with handles ``f(r, theta, phi) -> (3, ...)``.

The smooth corpus is built from the polynomial bump

    b(x) = (1 - |x - c|^2 / a^2)^p   for |x - c| < a,   0 outside,

which is C^{p-1} with compact support in the ball of radius |c| + a.  Its
gradient is potential, and ``rot(b w) = grad b x w`` for a constant vector w
is solenoidal.  Both have vanishing normal trace whenever |c| + a < R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fieldgrid import cartesian_to_spherical_vectors

__all__ = [
    "PolyBump",
    "constant_field",
    "named_field",
    "radial_field",
    "FIELD_NAMES",
]


def _cartesian(r, theta, phi):
    st = np.sin(theta)
    return np.stack([r * st * np.cos(phi), r * st * np.sin(phi), r * np.cos(theta)])


@dataclass(frozen=True)
class PolyBump:
    """Compactly supported bump ``(1 - |x - c|^2/a^2)^p``."""

    center: tuple[float, float, float] = (0.03, 0.02, -0.02)
    a: float = 0.9
    p: int = 8

    def _parts(self, r, theta, phi):
        r, theta, phi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, theta, phi)))
        d = _cartesian(r, theta, phi) - np.asarray(self.center, dtype=float).reshape(3, *([1] * r.ndim))
        u = 1.0 - np.sum(d * d, axis=0) / self.a**2
        inside = u > 0
        return theta, phi, d, np.where(inside, u, 0.0)

    def value(self, r, theta, phi):
        _, _, _, u = self._parts(r, theta, phi)
        return u**self.p

    def laplacian(self, r, theta, phi):
        _, _, d, u = self._parts(r, theta, phi)
        p, a2 = self.p, self.a**2
        d2 = np.sum(d * d, axis=0)
        return 4 * p * (p - 1) * u ** (p - 2) * d2 / a2**2 - 6 * p * u ** (p - 1) / a2

    def gradient_cartesian(self, r, theta, phi):
        _, _, d, u = self._parts(r, theta, phi)
        return -2.0 * self.p / self.a**2 * u ** (self.p - 1) * d

    def gradient(self, r, theta, phi):
        """Potential field grad b in spherical components."""
        theta, phi, d, u = self._parts(r, theta, phi)
        return cartesian_to_spherical_vectors(theta, phi, -2.0 * self.p / self.a**2 * u ** (self.p - 1) * d)

    def rot(self, w=(0.3, -0.5, 0.8)):
        """Handle for the solenoidal field rot(b w) = grad b x w."""
        w = np.asarray(w, dtype=float)

        def f(r, theta, phi):
            theta, phi, d, u = self._parts(r, theta, phi)
            g = -2.0 * self.p / self.a**2 * u ** (self.p - 1) * d
            c = np.cross(g, w.reshape(3, *([1] * (g.ndim - 1))), axis=0)
            return cartesian_to_spherical_vectors(theta, phi, c)

        return f


def radial_field(r, theta, phi):
    """f = grad(r^2) = 2 r e_r."""
    r, theta, phi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, theta, phi)))
    return np.stack([2.0 * r, np.zeros_like(r), np.zeros_like(r)])


def constant_field(r, theta, phi):
    """f = e_z in spherical components."""
    r, theta, phi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, theta, phi)))
    return np.stack([np.cos(theta), -np.sin(theta), np.zeros_like(r)])


_POT = PolyBump((0.03, 0.02, -0.02))
_SOL = PolyBump((-0.02, 0.02, 0.03))


def _bump_potential(r, theta, phi):
    return _POT.gradient(r, theta, phi)


_bump_solenoidal = _SOL.rot()


def _bump_mixed(r, theta, phi):
    return _bump_potential(r, theta, phi) + _bump_solenoidal(r, theta, phi)


def _zero(r, theta, phi):
    r = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, theta, phi)))[0]
    return np.zeros((3,) + r.shape)


_NAMED = {
    "bump-potential": _bump_potential,
    "bump-solenoidal": _bump_solenoidal,
    "bump": _bump_mixed,
    "radial": radial_field,
    "ez": constant_field,
    "zero": _zero,
}

FIELD_NAMES = tuple(sorted(_NAMED))


def named_field(name: str, R: float = 1.0):
    """Handle for a built-in field.

    Bump fields are defined for R = 1 and rescaled to keep the support
    inside the ball for other radii.
    """
    try:
        f = _NAMED[name]
    except KeyError:
        raise ValueError(f"unknown field {name!r}; choose from {', '.join(FIELD_NAMES)}") from None
    if not name.startswith("bump") or math.isclose(R, 1.0):
        return f

    def scaled(r, theta, phi):
        return f(np.asarray(r) / R, theta, phi)

    return scaled
