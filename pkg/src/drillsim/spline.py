"""Cylindrical mapping and overshoot-free periodic cubic splines.

The drill path is a fixed-radius circle discretized into n points. Commanded
height z is interpolated over the angular coordinate phi with piecewise
cubics whose node derivatives are prescribed: wherever the local slope
changes sign the derivative is forced to zero, so the curve never overshoots
the data. The domain is periodic; segment n wraps from phi_n to phi_1 + 2*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

TWO_PI = 2.0 * math.pi


def to_cylindrical(p_x: float, p_y: float) -> tuple[float, float]:
    """Map a point in the x-y plane to (rho, phi) with phi in (-pi, pi].

    Raises ValueError at the origin, where phi is undefined.
    """
    if p_x == 0.0 and p_y == 0.0:
        raise ValueError("cylindrical angle is undefined at the origin")
    rho = math.hypot(p_x, p_y)
    phi = math.atan2(p_y, p_x)
    if phi <= -math.pi:
        # atan2 returns -pi for negative-zero y; canonical range is (-pi, pi]
        phi = math.pi
    return rho, phi


@dataclass(frozen=True)
class TrajectoryPoint:
    """One discretized path point. index is 1-based, phi in (-pi, pi]."""

    index: int
    p_x: float  # m
    p_y: float  # m
    p_z: float  # m
    p_rho: float  # m
    p_phi: float  # rad


@dataclass
class TrajectoryState:
    """The n commanded path points on a circle of diameter d.

    phi is strictly increasing with uniform spacing 2*pi/n and ends at pi.
    z holds the commanded tip height per point and is the only mutable part.
    """

    d: float  # circle diameter, m
    phi: np.ndarray  # (n,) rad, strictly increasing in (-pi, pi]
    x: np.ndarray  # (n,) m
    y: np.ndarray  # (n,) m
    z: np.ndarray  # (n,) m, commanded height

    @classmethod
    def circle(cls, n: int, d: float, z0: float) -> "TrajectoryState":
        if n < 3:
            raise ValueError("need at least 3 trajectory points")
        if d <= 0.0:
            raise ValueError("circle diameter must be positive")
        spacing = TWO_PI / n
        phi = -math.pi + spacing * np.arange(1, n + 1)
        r = d / 2.0
        return cls(
            d=d,
            phi=phi,
            x=r * np.cos(phi),
            y=r * np.sin(phi),
            z=np.full(n, float(z0)),
        )

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def rho(self) -> float:
        return self.d / 2.0

    def points(self) -> Iterator[TrajectoryPoint]:
        for i in range(self.n):
            yield TrajectoryPoint(
                index=i + 1,
                p_x=float(self.x[i]),
                p_y=float(self.y[i]),
                p_z=float(self.z[i]),
                p_rho=self.rho,
                p_phi=float(self.phi[i]),
            )


def node_derivatives(z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Prescribed dz/dphi at every node of the periodic curve.

    Interior nodes use the harmonic-mean slope formula
        2 / (dphi_r/dz_r + dphi_l/dz_l)
    whenever the slope-sign product t_i = (z_{i+1}-z_i)(z_i-z_{i-1}) is
    positive, and 0 otherwise. Endpoints use the same rule with the wrap
    neighbor shifted by +-2*pi. A zero dz on either side makes t_i <= 0, so
    the division never sees a zero denominator.
    """
    z = np.asarray(z, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = z.shape[0]
    if phi.shape[0] != n:
        raise ValueError("z and phi must have equal length")
    if n < 3:
        raise ValueError("need at least 3 nodes")
    if np.any(np.diff(phi) <= 0.0):
        raise ValueError("phi must be strictly increasing")

    z_next = np.empty(n)
    z_next[:-1] = z[1:]
    z_next[-1] = z[0]
    z_prev = np.empty(n)
    z_prev[1:] = z[:-1]
    z_prev[0] = z[-1]
    phi_next = np.empty(n)
    phi_next[:-1] = phi[1:]
    phi_next[-1] = phi[0] + TWO_PI
    phi_prev = np.empty(n)
    phi_prev[1:] = phi[:-1]
    phi_prev[0] = phi[-1] - TWO_PI

    dz_r = z_next - z
    dz_l = z - z_prev
    t = dz_r * dz_l
    keep = t > 0.0

    # 2 / (dphi_r/dz_r + dphi_l/dz_l) rewritten with a single division; the
    # denominator is sign-definite wherever keep holds, so it is never zero.
    num = 2.0 * t
    den = (phi_next - phi) * dz_l + (phi - phi_prev) * dz_r
    deriv = np.zeros(n)
    np.divide(num, den, out=deriv, where=keep)
    return deriv


@dataclass(frozen=True)
class SplineSegment:
    """Cubic a + b*phi + c*phi**2 + d*phi**3 valid on [phi_l, phi_r]."""

    a_z: float
    b_z: float
    c_z: float
    d_z: float
    phi_l: float
    phi_r: float

    def value(self, phi: float | np.ndarray) -> float | np.ndarray:
        return self.a_z + phi * (self.b_z + phi * (self.c_z + phi * self.d_z))

    def derivative(self, phi: float | np.ndarray) -> float | np.ndarray:
        return self.b_z + phi * (2.0 * self.c_z + phi * 3.0 * self.d_z)

    @property
    def coefficients(self) -> tuple[float, float, float, float]:
        return (self.a_z, self.b_z, self.c_z, self.d_z)


def _hermite_system(phi_l: float, phi_r: float) -> np.ndarray:
    return np.array(
        [
            [1.0, phi_l, phi_l**2, phi_l**3],
            [1.0, phi_r, phi_r**2, phi_r**3],
            [0.0, 1.0, 2.0 * phi_l, 3.0 * phi_l**2],
            [0.0, 1.0, 2.0 * phi_r, 3.0 * phi_r**2],
        ]
    )


def fit_segment(
    phi_l: float,
    z_l: float,
    dz_l: float,
    phi_r: float,
    z_r: float,
    dz_r: float,
) -> SplineSegment:
    """Solve the 4x4 value/derivative system for one cubic segment."""
    if not phi_l < phi_r:
        raise ValueError("segment must have phi_l < phi_r")
    coeffs = np.linalg.solve(
        _hermite_system(phi_l, phi_r), np.array([z_l, z_r, dz_l, dz_r])
    )
    return SplineSegment(
        a_z=float(coeffs[0]),
        b_z=float(coeffs[1]),
        c_z=float(coeffs[2]),
        d_z=float(coeffs[3]),
        phi_l=phi_l,
        phi_r=phi_r,
    )


def _hermite_coefficients(phi_l, phi_r, z_l, z_r, d_l, d_r):
    """Closed-form solution of the segment system, elementwise-safe.

    Same cubic as fit_segment up to rounding, but O(1) flops: assemble in
    the local (phi - phi_l) basis, then expand to powers of phi. Works on
    scalars and on equally shaped arrays; the operation order is identical
    either way, so scalar and vectorized results agree bitwise.
    """
    h = phi_r - phi_l
    slope = (z_r - z_l) / h
    aa = (3.0 * slope - 2.0 * d_l - d_r) / h
    bb = (d_l + d_r - 2.0 * slope) / (h * h)
    a = z_l - phi_l * (d_l - phi_l * (aa - phi_l * bb))
    b = d_l - phi_l * (2.0 * aa - 3.0 * phi_l * bb)
    c = aa - 3.0 * phi_l * bb
    return a, b, c, bb


@dataclass
class SplineCurve:
    """Periodic piecewise cubic through n nodes with prescribed derivatives.

    Segment coefficients are materialized on demand: segment i is fully
    determined by nodes i-1 .. i+2, so evaluating one angle only ever solves
    one 4x4 system. The batched path solves all n systems at once.
    """

    phi: np.ndarray  # (n,) node angles
    z: np.ndarray  # (n,) node heights
    node_derivatives: np.ndarray  # (n,) dz/dphi at nodes
    _coeffs: np.ndarray | None = field(default=None, repr=False)
    _have: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    def _segment_bounds(self, i: int) -> tuple[float, float, float, float]:
        n = self.n
        phi_l = self.phi[i]
        if i == n - 1:
            return phi_l, self.phi[0] + TWO_PI, self.z[i], self.z[0]
        return phi_l, self.phi[i + 1], self.z[i], self.z[i + 1]

    def _solve_one(self, i: int) -> np.ndarray:
        phi_l, phi_r, z_l, z_r = self._segment_bounds(i)
        d_l = self.node_derivatives[i]
        d_r = self.node_derivatives[(i + 1) % self.n]
        return np.array(_hermite_coefficients(phi_l, phi_r, z_l, z_r, d_l, d_r))

    def _materialize_all(self) -> np.ndarray:
        n = self.n
        phi_r = np.empty(n)
        phi_r[:-1] = self.phi[1:]
        phi_r[-1] = self.phi[0] + TWO_PI
        z_r = np.empty(n)
        z_r[:-1] = self.z[1:]
        z_r[-1] = self.z[0]
        d_r = np.empty(n)
        d_r[:-1] = self.node_derivatives[1:]
        d_r[-1] = self.node_derivatives[0]
        a, b, c, d = _hermite_coefficients(
            self.phi, phi_r, self.z, z_r, self.node_derivatives, d_r
        )
        return np.stack([a, b, c, d], axis=1)

    def coefficients(self, i: int) -> np.ndarray:
        """(a, b, c, d) for segment i, solving lazily and caching."""
        if self._coeffs is None:
            self._coeffs = np.zeros((self.n, 4))
            self._have = np.zeros(self.n, dtype=bool)
        if not self._have[i]:
            self._coeffs[i] = self._solve_one(i)
            self._have[i] = True
        return self._coeffs[i]

    @property
    def segments(self) -> list[SplineSegment]:
        self._coeffs = self._materialize_all()
        self._have = np.ones(self.n, dtype=bool)
        out = []
        for i in range(self.n):
            phi_l, phi_r, _, _ = self._segment_bounds(i)
            a, b, c, d = self._coeffs[i]
            out.append(
                SplineSegment(
                    a_z=float(a),
                    b_z=float(b),
                    c_z=float(c),
                    d_z=float(d),
                    phi_l=float(phi_l),
                    phi_r=float(phi_r),
                )
            )
        return out

    def segment_index(self, phi: float) -> tuple[int, float]:
        """Segment containing phi and the equivalent unwrapped angle."""
        u = (phi - self.phi[0]) % TWO_PI + self.phi[0]
        i = int(np.searchsorted(self.phi, u, side="right")) - 1
        if i < 0:
            # u == phi[0] up to rounding of the modulo
            i = 0
        return i, u

    def __call__(self, phi: float | np.ndarray) -> float | np.ndarray:
        if np.ndim(phi) == 0:
            i, u = self.segment_index(float(phi))
            a, b, c, d = self.coefficients(i)
            return float(a + u * (b + u * (c + u * d)))
        phi = np.asarray(phi, dtype=float)
        u = (phi - self.phi[0]) % TWO_PI + self.phi[0]
        idx = np.searchsorted(self.phi, u, side="right") - 1
        idx[idx < 0] = 0
        coeffs = self._materialize_all()
        self._coeffs = coeffs
        self._have = np.ones(self.n, dtype=bool)
        a, b, c, d = (coeffs[idx, k] for k in range(4))
        return a + u * (b + u * (c + u * d))

    def derivative(self, phi: float) -> float:
        i, u = self.segment_index(float(phi))
        _, b, c, d = self.coefficients(i)
        return float(b + u * (2.0 * c + u * 3.0 * d))


def build_spline(trajectory: TrajectoryState) -> SplineCurve:
    """Construct the periodic curve through the trajectory's (phi, z) nodes."""
    derivs = node_derivatives(trajectory.z, trajectory.phi)
    return SplineCurve(
        phi=trajectory.phi, z=trajectory.z.copy(), node_derivatives=derivs
    )


def eval_spline(curve: SplineCurve, phi: float | np.ndarray) -> float | np.ndarray:
    """Height of the curve at any angle; phi is reduced modulo 2*pi."""
    if np.ndim(phi) == 0 and not math.isfinite(float(phi)):
        raise ValueError("phi must be finite")
    return curve(phi)
