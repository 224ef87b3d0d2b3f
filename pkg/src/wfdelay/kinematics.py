"""Relativistic point-particle kinematics and the inverse-square force field.

Units have the speed of light equal to one.  Vectors are plain ``numpy``
arrays of shape ``(3,)``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, SingularSeparation, SuperluminalVelocity

# norms below this are treated as zero; 1/|x|^2 would overflow
TINY_NORM = 1e-300


def vec3(x):
    v = np.asarray(x, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise InvalidArgument(f"non-finite vector {v!r}")
    return v


@dataclass(frozen=True)
class ChargeParams:
    mass: float
    charge: float
    label: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass > 0):
            raise InvalidArgument(f"mass must be positive, got {self.mass}")
        if not np.isfinite(self.charge) or self.charge == 0:
            raise InvalidArgument(f"charge must be nonzero, got {self.charge}")
        if self.label not in (1, 2):
            raise InvalidArgument(f"label must be 1 or 2, got {self.label}")

    def to_dict(self):
        return {"mass": self.mass, "charge": self.charge, "label": self.label}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["mass"]), float(d["charge"]), int(d.get("label", 1)))


@dataclass(frozen=True)
class PhasePoint:
    time: float
    position: np.ndarray
    momentum: np.ndarray

    def velocity(self, mass):
        return velocity_of_momentum(self.momentum, mass)


def velocity_of_momentum(p, m):
    """v(p) = p / sqrt(m^2 + p^2); always strictly subluminal."""
    p = vec3(p)
    if not m > 0:
        raise InvalidArgument(f"mass must be positive, got {m}")
    # scale out the larger of m, |p| so huge momenta do not overflow
    s = max(m, float(np.max(np.abs(p))))
    ps = p / s
    return ps / np.sqrt((m / s) ** 2 + ps @ ps)


def momentum_of_velocity(v, m):
    v = vec3(v)
    v2 = v @ v
    if v2 >= 1.0:
        raise SuperluminalVelocity(f"|v| = {np.sqrt(v2)} >= 1")
    return m * v / np.sqrt(1.0 - v2)


def lorentz_gamma(speed):
    speed = float(speed)
    if not np.isfinite(speed) or speed < 0:
        raise InvalidArgument(f"speed must be finite and non-negative, got {speed}")
    if speed >= 1.0:
        raise SuperluminalVelocity(f"speed {speed} >= 1")
    return 1.0 / np.sqrt(1.0 - speed * speed)


def coulomb_force(x):
    """F(x) = x / |x|^3."""
    x = vec3(x)
    r = np.linalg.norm(x)
    if r < TINY_NORM:
        raise SingularSeparation("coulomb_force evaluated at zero separation")
    return x / r**3


def coulomb_inverse(y):
    """Global inverse of :func:`coulomb_force`, I(y) = y / |y|^(3/2)."""
    y = vec3(y)
    r = np.linalg.norm(y)
    if r < TINY_NORM:
        raise SingularSeparation("coulomb_inverse evaluated at zero field")
    return y / r**1.5


def coulomb_force_many(x):
    """Row-wise :func:`coulomb_force` for an ``(n, 3)`` array."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < TINY_NORM):
        raise SingularSeparation("coulomb_force evaluated at zero separation")
    return x / r[..., None] ** 3


def coulomb_inverse_many(y):
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(y, axis=-1)
    if np.any(r < TINY_NORM):
        raise SingularSeparation("coulomb_inverse evaluated at zero field")
    return y / r[..., None] ** 1.5
