"""Least-squares plane fitting and trajectory offsets.

During a run the planner fits z = alpha*x + beta*y + gamma through the
points whose completion estimate is nonzero and snaps the remaining points
toward that plane. Fitting is plain least squares; degenerate input (fewer
than 3 points, or x-y positions that are collinear) yields an invalid fit
and zero offsets so the caller degrades to undamped descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spline import TrajectoryState

# Collinearity rule: smallest singular value of the centered x-y design
# below this fraction of the largest means the plane is not determined.
COLLINEAR_SV_RATIO = 1e-9


@dataclass(frozen=True)
class PlaneFit:
    """z = alpha*x + beta*y + gamma, or invalid when underdetermined.

    sv_ratio is the smallest/largest singular value of the centered x-y
    design; it is 0.0 for invalid fits and can be used as a conditioning
    signal (a near-collinear arc of points pins the plane poorly along the
    perpendicular direction even when the fit is formally valid).

    sigma is the residual standard deviation (zero when the fit is exact or
    has no spare degrees of freedom), and pred_mat maps a design row
    (x, y, 1) to a vector whose norm is the prediction leverage, so the
    standard error of the fitted height at any position is
    sigma * ||pred_mat @ (x, y, 1)||. Extrapolating far from a short arc of
    input points gives leverages well above one, which is what makes the
    error band honest where the plane is unconstrained.
    """

    alpha: float
    beta: float
    gamma: float  # m
    valid: bool
    point_count: int
    sv_ratio: float = 0.0
    sigma: float = 0.0  # m
    pred_mat: np.ndarray | None = None  # 3x3

    def height(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.alpha * x + self.beta * y + self.gamma

    def height_stderr(
        self, x: np.ndarray, y: np.ndarray, sigma: float | None = None
    ) -> np.ndarray:
        """Pointwise standard error of the fitted height.

        A caller may supply its own sigma (for example a floor on the
        residual estimate, which is unreliable with few points).
        """
        if self.pred_mat is None:
            raise ValueError("fit carries no prediction factor")
        s = self.sigma if sigma is None else sigma
        rows = np.stack((np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                         np.ones_like(np.asarray(x, dtype=float))))
        return s * np.linalg.norm(self.pred_mat @ rows, axis=0)


INVALID_FIT = PlaneFit(alpha=0.0, beta=0.0, gamma=0.0, valid=False, point_count=0)


def _xy_sv_ratio(x: np.ndarray, y: np.ndarray) -> float:
    """Singular-value ratio of the centered (x, y) design.

    Computed with an actual SVD: the closed-form 2x2 Gram eigenvalue route
    has a rounding floor near 1e-8 on exactly collinear data, far above the
    1e-9 degeneracy threshold, while SVD resolves collinearity to ~1e-15.
    """
    xc = x - x.mean()
    yc = y - y.mean()
    s = np.linalg.svd(np.column_stack((xc, yc)), compute_uv=False)
    if s[0] <= 0.0:
        return 0.0
    return float(s[1] / s[0])


def fit_plane(points: np.ndarray) -> PlaneFit:
    """Least-squares plane through (x, y, z) rows.

    Accepts any sequence convertible to an (N, 3) array; N may be 0.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return INVALID_FIT
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be an (N, 3) array of x, y, z")
    count = pts.shape[0]
    if count < 3:
        return PlaneFit(0.0, 0.0, 0.0, valid=False, point_count=count)

    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    ratio = _xy_sv_ratio(x, y)
    if ratio < COLLINEAR_SV_RATIO:
        return PlaneFit(0.0, 0.0, 0.0, valid=False, point_count=count)

    # Thin QR of the design keeps the solve well conditioned despite the
    # scale gap between the coordinate columns and the intercept column,
    # and its R factor doubles as the prediction-leverage map.
    design = np.column_stack((x, y, np.ones(count)))
    q, r = np.linalg.qr(design)
    alpha, beta, gamma = np.linalg.solve(r, q.T @ z)
    resid = z - design @ np.array([alpha, beta, gamma])
    dof = count - 3
    sigma = math.sqrt(float(resid @ resid) / dof) if dof > 0 else 0.0
    return PlaneFit(
        alpha=float(alpha),
        beta=float(beta),
        gamma=float(gamma),
        valid=True,
        point_count=count,
        sv_ratio=ratio,
        sigma=sigma,
        pred_mat=np.linalg.inv(r).T,
    )


def plane_offsets(fit: PlaneFit, trajectory: TrajectoryState) -> np.ndarray:
    """Per-point offset that would move each commanded z onto the plane.

    Invalid fits produce an all-zero vector.
    """
    if not fit.valid:
        return np.zeros(trajectory.n)
    return fit.height(trajectory.x, trajectory.y) - trajectory.z
