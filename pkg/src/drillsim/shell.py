"""Synthetic drillable shell: ground-truth surface, thickness and removal.

The world is a thin curved shell over a compliant membrane. Its top height
is a tilted plane plus a smooth low-frequency perturbation and its thickness
varies smoothly around the ring. Both fields are deterministic functions of
(x, y, seed). Drilling is position-controlled: a pass removes material down
to the tip height over a small angular footprint, and depth never shrinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spline import TWO_PI, TrajectoryState

RUPTURE_MARGIN = 20e-6  # m past the membrane before it counts as ruptured


@dataclass(frozen=True)
class SurfaceConfig:
    """Sampling ranges for generate_surface. Lengths in meters."""

    tilt_min_deg: float = 5.0
    tilt_max_deg: float = 9.5
    perturb_amp_min: float = 2e-5
    perturb_amp_max: float = 5e-5
    perturb_harmonics: tuple[int, ...] = (1, 2, 3)
    tau_nominal: float = 350e-6
    tau_variation: float = 0.12  # fraction of nominal, peak
    tau_harmonics: tuple[int, ...] = (1, 2, 3, 4)

    def validate(self) -> None:
        if not 0.0 <= self.tilt_min_deg <= self.tilt_max_deg <= 15.0:
            raise ValueError("tilt range must satisfy 0 <= min <= max <= 15 degrees")
        if self.tau_nominal <= 0.0:
            raise ValueError("nominal thickness must be positive")
        if not 0.0 <= self.tau_variation < 1.0:
            raise ValueError("thickness variation must be in [0, 1)")
        if self.perturb_amp_min < 0.0 or self.perturb_amp_max < self.perturb_amp_min:
            raise ValueError("bad perturbation amplitude range")


@dataclass(frozen=True)
class ShellSurface:
    """Deterministic top-height and thickness fields for one trial."""

    tilt_deg: float
    tilt_azimuth: float  # rad, direction of steepest ascent
    perturb_amps: np.ndarray  # (H,) m
    perturb_phases: np.ndarray  # (H,) rad
    perturb_harmonics: np.ndarray  # (H,) int
    tau_nominal: float  # m
    tau_weights: np.ndarray  # (G,) sums to tau_variation
    tau_phases: np.ndarray  # (G,) rad
    tau_harmonics: np.ndarray  # (G,) int
    seed: object  # whatever seeded the generator (int or SeedSequence)

    def height(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Top surface height, m."""
        slope = math.tan(math.radians(self.tilt_deg))
        h = slope * (
            np.asarray(x) * math.cos(self.tilt_azimuth)
            + np.asarray(y) * math.sin(self.tilt_azimuth)
        )
        phi = np.arctan2(y, x)
        for k, amp, psi in zip(
            self.perturb_harmonics, self.perturb_amps, self.perturb_phases
        ):
            h = h + amp * np.cos(k * phi + psi)
        return h

    def thickness(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Shell thickness, m. Strictly positive because weights sum below 1."""
        phi = np.arctan2(y, x)
        g = np.zeros_like(np.asarray(phi, dtype=float))
        for k, w, psi in zip(self.tau_harmonics, self.tau_weights, self.tau_phases):
            g = g + w * np.cos(k * phi + psi)
        return self.tau_nominal * (1.0 + g)


def generate_surface(config: SurfaceConfig, seed: int) -> ShellSurface:
    """Draw one surface; identical (config, seed) gives identical fields."""
    config.validate()
    rng = np.random.default_rng(seed)
    tilt = rng.uniform(config.tilt_min_deg, config.tilt_max_deg)
    azimuth = rng.uniform(-math.pi, math.pi)

    hk = np.asarray(config.perturb_harmonics, dtype=int)
    total_amp = rng.uniform(config.perturb_amp_min, config.perturb_amp_max)
    shares = rng.uniform(0.2, 1.0, size=hk.shape[0])
    amps = total_amp * shares / shares.sum() if hk.size else shares
    perturb_phases = rng.uniform(-math.pi, math.pi, size=hk.shape[0])

    gk = np.asarray(config.tau_harmonics, dtype=int)
    tau_shares = rng.uniform(0.2, 1.0, size=gk.shape[0])
    tau_weights = config.tau_variation * tau_shares / tau_shares.sum()
    tau_phases = rng.uniform(-math.pi, math.pi, size=gk.shape[0])

    return ShellSurface(
        tilt_deg=float(tilt),
        tilt_azimuth=float(azimuth),
        perturb_amps=amps,
        perturb_phases=perturb_phases,
        perturb_harmonics=hk,
        tau_nominal=config.tau_nominal,
        tau_weights=tau_weights,
        tau_phases=tau_phases,
        tau_harmonics=gk,
        seed=seed,
    )


@dataclass
class ShellState:
    """Per-trial drilling state sampled on the trajectory grid."""

    phi: np.ndarray  # (n,) grid angles
    height: np.ndarray  # (n,) local top surface, m
    tau: np.ndarray  # (n,) local thickness, m
    drilled_depth: np.ndarray  # (n,) m, measured down from local top
    rupture_margin: float  # m
    footprint_halfwidth: float  # rad
    max_overshoot: float = -math.inf  # max over time of depth - tau, m
    ruptured: bool = False
    rupture_index: int | None = None  # 1-based grid index of first rupture
    _spacing: float = field(init=False)

    def __post_init__(self) -> None:
        self._spacing = TWO_PI / self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[0]


def make_shell_state(
    surface: ShellSurface,
    trajectory: TrajectoryState,
    rupture_margin: float = RUPTURE_MARGIN,
    footprint_halfwidth: float | None = None,
) -> ShellState:
    """Sample the surface on the trajectory grid and start with zero depth."""
    n = trajectory.n
    if footprint_halfwidth is None:
        footprint_halfwidth = 2.0 * TWO_PI / n
    return ShellState(
        phi=trajectory.phi,
        height=np.asarray(surface.height(trajectory.x, trajectory.y), dtype=float),
        tau=np.asarray(surface.thickness(trajectory.x, trajectory.y), dtype=float),
        drilled_depth=np.zeros(n),
        rupture_margin=rupture_margin,
        footprint_halfwidth=footprint_halfwidth,
    )


def apply_drill(
    state: ShellState, tip_z: float, drill_angle: float, dt: float
) -> ShellState:
    """Cut every grid point under the footprint down to the tip height.

    dt must be positive; it is not otherwise used because removal is
    position-controlled (the spindle is far faster than the descent).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    n = state.n
    spacing = state._spacing
    phi = state.phi
    height = state.height
    tau = state.tau
    depth = state.drilled_depth
    halfwidth = state.footprint_halfwidth + 1e-12
    cur = int(round((drill_angle - phi[0]) / spacing))
    reach = min(int(math.ceil(state.footprint_halfwidth / spacing)) + 1, n // 2)

    # The footprint spans only a few grid points, so a scalar loop is
    # cheaper than vectorizing over a length-7 slice every cycle.
    worst_over = -math.inf
    worst_idx = -1
    for k in range(-reach, reach + 1):
        j = (cur + k) % n
        dist = abs((phi[j] - drill_angle + math.pi) % TWO_PI - math.pi)
        if dist > halfwidth:
            continue
        cut = height[j] - tip_z
        if cut > depth[j]:
            depth[j] = cut
        over = depth[j] - tau[j]
        if over > worst_over:
            worst_over = over
            worst_idx = j
    if worst_idx < 0:
        return state

    if worst_over > state.max_overshoot:
        state.max_overshoot = float(worst_over)
    if not state.ruptured and worst_over > state.rupture_margin:
        state.ruptured = True
        state.rupture_index = worst_idx + 1
    return state


def ground_truth_completion(state: ShellState) -> np.ndarray:
    """True per-point completion: drilled depth over thickness, in [0, 1]."""
    return np.clip(state.drilled_depth / state.tau, 0.0, 1.0)


def dump_surface_csv(surface: ShellSurface, trajectory: TrajectoryState, path) -> None:
    """Write per-grid-point surface height and thickness for inspection."""
    h = surface.height(trajectory.x, trajectory.y)
    tau = surface.thickness(trajectory.x, trajectory.y)
    with open(path, "w", newline="") as fh:
        fh.write("index,phi_rad,x_m,y_m,height_m,thickness_m\n")
        for i in range(trajectory.n):
            fh.write(
                f"{i + 1},{trajectory.phi[i]:.9f},{trajectory.x[i]:.9e},"
                f"{trajectory.y[i]:.9e},{h[i]:.9e},{tau[i]:.9e}\n"
            )
