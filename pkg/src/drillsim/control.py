"""Closed-loop drilling control: damped descent, plane snapping, outcomes.

One trial advances a commanded circular trajectory at the planner rate while
a single drill tip sweeps the circle at the turn period. Every cycle the
loop senses the world, fuses the estimates, optionally snaps untouched
points toward the fitted plane, lowers the commanded heights with the
velocity damper, rebuilds the spline and cuts under the tip. The trial ends
when the completion criterion is met on the estimates, when membrane damage
becomes large enough that an operator would abort, or on timeout.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fusion
from .fusion import criterion_count
from .plane import PlaneFit, fit_plane
from .sensors import (
    ForceSensor,
    ForceSensorConfig,
    ImageSensor,
    ImageSensorConfig,
)
from .shell import (
    RUPTURE_MARGIN,
    ShellSurface,
    SurfaceConfig,
    apply_drill,
    generate_surface,
    ground_truth_completion,
    make_shell_state,
)
from .spline import TWO_PI, SplineCurve, TrajectoryState, build_spline, eval_spline

CLASSIFICATIONS = ("Success", "UnderDrill", "OverDrillModel", "OverDrillIntervened")
_DEBUG_TAP = None  # TEMP DEBUG


@dataclass(frozen=True)
class ControlConfig:
    """Planner and termination parameters. Units noted per field."""

    v_z: float = -6e-6  # m/s nominal descent
    d: float = 8e-3  # m drill-path diameter
    f_traj: float = 30.0  # Hz planning rate
    turn_period: float = 16.0  # s per revolution of the drill
    n: int = 320  # grid points on the circle
    criterion_fraction: float = 0.80
    criterion_level: float = 0.85
    clearance: float = 5e-5  # m initial tip height above the highest point
    timeout_min: float = 40.0  # simulated minutes
    image_period_s: float = 1.0  # s between vision inferences
    rupture_margin: float = RUPTURE_MARGIN  # m past membrane -> ruptured flag
    intervention_margin: float = 8e-5  # m past membrane -> operator aborts
    removable_fraction: float = 0.95
    removable_level: float = 0.85  # true completion needed for removability
    footprint_halfwidth: float | None = None  # rad; default 2 grid spacings
    settle_turns: float = 3.0  # extra revolutions drilled after the criterion
    use_plane_fit: bool = True
    use_force: bool = True
    plane_offsets_all_points: bool = False
    plane_min_sv_ratio: float = 0.10  # conditioning gate for applying offsets
    plane_fit_history: int = 2  # distinct refits whose agreed depth is snapped
    max_snap_step: float = 6e-6  # m per cycle cap on plane snapping
    snap_standoff: float = 4e-5  # m left above the snap target, closed at v_z
    record_max_level: float = 0.85  # deepest sensed completion still recorded
    plane_trust_records: int = 24  # records before cut points may snap too
    plane_trust_sv: float = 0.30  # conditioning before cut points may snap too
    snap_bite: float = 0.64  # shell fraction a trusted snap commands below fit

    def validate(self) -> None:
        if self.v_z >= 0.0:
            raise ValueError("descent velocity must be negative")
        if self.d <= 0.0 or self.n < 3:
            raise ValueError("bad path geometry")
        if self.f_traj <= 0.0 or self.turn_period <= 0.0:
            raise ValueError("bad timing parameters")
        for frac in (self.criterion_fraction, self.criterion_level):
            if not 0.0 < frac <= 1.0:
                raise ValueError("criterion values must be in (0, 1]")
        if self.timeout_min <= 0.0:
            raise ValueError("timeout must be positive")
        if self.max_snap_step <= 0.0:
            raise ValueError("snap step cap must be positive")
        if self.image_period_s <= 0.0:
            raise ValueError("image period must be positive")
        if self.settle_turns < 0.0:
            raise ValueError("settle turns must be nonnegative")
        if self.snap_standoff < 0.0:
            raise ValueError("snap standoff must be nonnegative")
        if self.plane_fit_history < 1:
            raise ValueError("plane fit history must be at least 1")
        if not 0.0 < self.record_max_level <= 1.0:
            raise ValueError("record level cap must be in (0, 1]")
        if self.plane_trust_records < 3:
            raise ValueError("plane trust record count must be at least 3")
        if self.plane_trust_sv < 0.0:
            raise ValueError("plane trust conditioning must be nonnegative")
        if not 0.0 <= self.snap_bite < 1.0:
            raise ValueError("snap bite must be in [0, 1)")

    @property
    def T(self) -> float:
        return 1.0 / self.f_traj


@dataclass(frozen=True)
class TrialConfig:
    """Everything one trial needs besides its seeds."""

    control: ControlConfig = ControlConfig()
    surface: SurfaceConfig = SurfaceConfig()
    image: ImageSensorConfig = ImageSensorConfig()
    force: ForceSensorConfig = ForceSensorConfig()


@dataclass
class Trace:
    """Per-cycle scalars recorded during a trial."""

    cycle: np.ndarray
    sim_time_s: np.ndarray
    drill_angle_rad: np.ndarray
    tip_z_m: np.ndarray
    min_c: np.ndarray
    mean_c: np.ndarray
    criterion_met: np.ndarray
    ruptured: np.ndarray
    plane_valid: np.ndarray
    plane_alpha: np.ndarray
    plane_beta: np.ndarray
    plane_gamma: np.ndarray

    @classmethod
    def from_rows(cls, rows: Sequence[tuple]) -> "Trace":
        arr = np.asarray(rows, dtype=float)
        if arr.size == 0:
            arr = np.zeros((0, 12))
        return cls(
            cycle=arr[:, 0].astype(int),
            sim_time_s=arr[:, 1],
            drill_angle_rad=arr[:, 2],
            tip_z_m=arr[:, 3],
            min_c=arr[:, 4],
            mean_c=arr[:, 5],
            criterion_met=arr[:, 6].astype(bool),
            ruptured=arr[:, 7].astype(bool),
            plane_valid=arr[:, 8].astype(bool),
            plane_alpha=arr[:, 9],
            plane_beta=arr[:, 10],
            plane_gamma=arr[:, 11],
        )

    def __len__(self) -> int:
        return self.cycle.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("cycle,sim_time_s,drill_angle_rad,min_c,mean_c,criterion_met,ruptured\n")
            for i in range(len(self)):
                fh.write(
                    f"{self.cycle[i]},{self.sim_time_s[i]:.6f},"
                    f"{self.drill_angle_rad[i]:.9f},{self.min_c[i]:.9f},"
                    f"{self.mean_c[i]:.9f},{int(self.criterion_met[i])},"
                    f"{int(self.ruptured[i])}\n"
                )


@dataclass
class RunOutcome:
    """Result of one simulated trial."""

    classification: str
    drilling_time_min: float  # time to the stop decision, settle excluded
    trace: Trace
    criterion_met: bool
    criterion_time_min: float | None
    ruptured: bool
    removable: bool
    cycles: int
    max_overshoot_m: float
    rupture_index: int | None
    final_progress: np.ndarray
    final_truth: np.ndarray
    surface: ShellSurface


def damped_velocities(c: np.ndarray, v_z: float) -> np.ndarray:
    """Descent speed per point: nominal scaled by remaining completion."""
    return (1.0 - np.asarray(c, dtype=float)) * v_z


def advance_plan(
    trajectory: TrajectoryState,
    c: np.ndarray,
    plane_offsets: np.ndarray,
    T: float,
    v_z: float = -6e-6,
) -> tuple[TrajectoryState, SplineCurve]:
    """One planning step: damped descent plus plane offset, spline rebuilt.

    The commanded height is clamped to be monotone nonincreasing: an offset
    that would lift a point above its current height leaves it unchanged.
    The trajectory is updated in place and returned with the fresh curve.
    """
    dz = damped_velocities(c, v_z) * T + plane_offsets
    np.minimum(dz, 0.0, out=dz)
    trajectory.z += dz
    return trajectory, build_spline(trajectory)


def completion_criterion(
    c: np.ndarray, fraction: float = 0.80, level: float = 0.85
) -> bool:
    """True when at least fraction of the points reach the level."""
    c = np.asarray(c)
    need = criterion_count(fraction, c.shape[0])
    return int(np.count_nonzero(c >= level)) >= need


def classify_outcome(criterion_met: bool, ruptured: bool, removable: bool) -> str:
    """Four-way outcome from the three termination facts."""
    if criterion_met:
        if ruptured:
            return "OverDrillModel"
        return "Success" if removable else "UnderDrill"
    # Criterion never met: rupture means the operator had to step in,
    # otherwise the run timed out with the shell still attached.
    return "OverDrillIntervened" if ruptured else "UnderDrill"


def run_trial(
    config: TrialConfig,
    surface_seed,
    image_seed,
    force_seed,
    image_sensor: ImageSensor | None = None,
    force_sensor: ForceSensor | None = None,
) -> RunOutcome:
    """Simulate one drilling run; identical inputs give identical outcomes.

    Custom recognizer instances may be injected for the two sensors; by
    default they are built from the config with one rng stream each.
    """
    ctl = config.control
    ctl.validate()
    n = ctl.n
    T = ctl.T
    omega = TWO_PI / ctl.turn_period

    surface = generate_surface(config.surface, surface_seed)
    trajectory = TrajectoryState.circle(n, ctl.d, 0.0)
    state = make_shell_state(
        surface,
        trajectory,
        rupture_margin=ctl.rupture_margin,
        footprint_halfwidth=ctl.footprint_halfwidth,
    )
    trajectory.z[:] = state.height.max() + ctl.clearance

    if image_sensor is None:
        image_sensor = ImageSensor(
            config.image, np.random.default_rng(image_seed), trajectory.phi
        )
    force_model = config.force.accuracy_model()
    if ctl.use_force and force_sensor is None:
        force_sensor = ForceSensor(config.force, np.random.default_rng(force_seed))
    w2_window = force_model.window_weights() if ctl.use_force else None

    progress = np.zeros(n)
    c_true = np.zeros(n)
    zero_offsets = np.zeros(n)
    w2_full = np.zeros(n)
    force_pad = np.zeros(n)
    window_base = np.arange(force_model.K)
    # Estimated shell-surface height where the image first reported nonzero
    # completion at a point it measures directly: the commanded height there
    # plus the sensed completion times the nominal thickness, which backs
    # the cut depth out of the reading. These are the controller's
    # observations of where the shell sits, and the plane is fitted to them.
    # Tempting alternatives fail. Fitting the current commanded heights
    # gives a flat plane regardless of tilt, because early on they are
    # still the nearly flat starting plan. Recording points whose progress
    # comes only from interpolation between image samples smears the fit
    # input into plateaus of the plan height. Recording the commanded
    # height without the depth correction lets one low fit feed the next,
    # because a point snapped below its true surface is first cut deep and
    # would enter the fit at the cut height instead of the surface. And
    # force readings make poor records even with the correction: a reading
    # stays clipped at zero until completion exceeds the error draw, so
    # force-detected contacts lag by up to a third of the thickness, and
    # enough of them over a short arc tilt the fit far off the surface.
    contact_z = np.full(n, math.nan)
    image_indices = np.arange(0, n, image_sensor.step)
    tau_nominal = config.surface.tau_nominal
    # Lowest tip height each point has been cut to. Estimates describe the
    # cut surface, which only changes when the tip passes, while the plan
    # keeps descending between passes; records pair the estimate with the
    # height of the cut it measured, not with the newer plan.
    plan_at_cut = np.full(n, np.inf)
    # Safety floor under the snap targets. A fit through a handful of
    # records on a short arc pins the slope along the arc but barely
    # constrains the slope across it, so an early fit can land hundreds of
    # micrometers below the far side of the ring, and the monotone plan
    # cannot recover after descending there. The floor is the lowest
    # surface compatible with the confirmed contacts: each record relaxes
    # with chord distance at the steepest configured tilt, plus an
    # allowance for the perturbation budget and record noise. It never
    # binds a decent fit, because the true surface always sits above it.
    slope_bound = math.tan(math.radians(config.surface.tilt_max_deg))
    floor_allow = 2.0 * config.surface.perturb_amp_max + 5e-5
    chord = ctl.d * np.sin(np.pi * np.arange(n) / n)
    floor_profile = -slope_bound * chord - floor_allow
    snap_floor = np.full(n, -np.inf)
    snap_active = False
    fit_hist: deque[np.ndarray] = deque(maxlen=ctl.plane_fit_history)
    records_version = 0
    fits_version = -1

    phi0 = float(trajectory.phi[0])
    spacing = TWO_PI / n
    theta0 = phi0
    # The drill cuts everything within the footprint down to the plan height
    # at the tip angle, not at the point being cut, so on a tilted plan a
    # node that keeps descending drags already-finished neighbors deeper by
    # up to the plan slope times the halfwidth (tens of micrometers at the
    # steepest tilts). Descent is therefore damped by the most finished
    # estimate within the footprint's reach instead of the point's own. The
    # reach extends one node past the halfwidth because the spline segment
    # under the tip is bounded below by its far endpoint.
    guard_reach = min(
        int(math.ceil(state.footprint_halfwidth / spacing)) + 1, n // 2
    )
    guard = np.zeros(n)
    need_count = criterion_count(ctl.criterion_fraction, n)
    removable_need = criterion_count(ctl.removable_fraction, n)
    max_cycles = int(round(ctl.timeout_min * 60.0 * ctl.f_traj))
    image_every = max(1, int(round(ctl.image_period_s * ctl.f_traj)))

    rows: list[tuple] = []
    criterion_met = False
    criterion_time: float | None = None
    intervened = False
    t = 0.0
    img_up = np.zeros(n)
    # Extra revolutions drilled under normal closed-loop control after the
    # criterion fires, before the drill retracts. They serve two purposes:
    # every point gets a final cut at a plan at most one turn old (the tip
    # visits each angle once per turn, so mid-loop the cut lags the plan),
    # and the slowest points the criterion does not wait for keep advancing
    # at their still-high damped rate and close most of the removability
    # gap. Saturated points barely move: their velocity is near zero.
    settle_cycles = int(round(ctl.settle_turns * ctl.turn_period * ctl.f_traj))
    settle_left = -1

    for cycle in range(1, max_cycles + 1):
        t = cycle * T
        theta = (theta0 + omega * t + math.pi) % TWO_PI - math.pi
        if theta <= -math.pi:
            theta = math.pi
        cur = int(round((theta - phi0) / spacing)) % n

        # Sense and fuse. Vision inference runs at its own slower cadence;
        # between frames the last upsampled estimate stands. The force
        # window starts at the drill and looks a quarter turn ahead.
        if (cycle - 1) % image_every == 0:
            img_m, occluded = image_sensor.recognize(c_true, theta)
            img_up = fusion.upsample_image(img_m, n)
            seen = ~occluded & (img_m > 0.0)
            if seen.any():
                # Surface records ratchet upward across frames: a single
                # frame can read far below the truth, and keeping the
                # highest reconstruction converges on the near-exact frames.
                # Sightings past the level cap are dropped because the
                # nominal-thickness correction error grows with depth.
                idx = image_indices[seen]
                est_seen = img_m[seen]
                cand = plan_at_cut[idx] + est_seen * tau_nominal
                old = contact_z[idx]
                shallow = est_seen <= ctl.record_max_level
                take = shallow & (np.isnan(old) | (cand > old))
                if take.any():
                    records_version += 1
                    contact_z[idx[take]] = cand[take]
                    for j, zrec in zip(idx[take], cand[take]):
                        np.maximum(
                            snap_floor,
                            zrec + np.roll(floor_profile, j),
                            out=snap_floor,
                        )
        if ctl.use_force:
            widx = (cur + window_base) % n
            w2_full.fill(0.0)
            force_pad.fill(0.0)
            w2_full[widx] = w2_window
            force_pad[widx] = force_sensor.recognize(c_true[widx])
            fused = fusion.fuse(img_up, force_pad, w2_full)
        else:
            fused = img_up
        np.maximum(progress, fused, out=progress)

        # Plane fit through the first-contact heights, snapping only
        # untouched points (and only downward). Poorly conditioned fits are
        # not applied: a short contacted arc leaves the slope perpendicular
        # to it unconstrained.
        offsets = zero_offsets
        fit = None
        if ctl.use_plane_fit:
            mask = ~np.isnan(contact_z)
            contacted = int(np.count_nonzero(mask))
            untouched = progress == 0.0
            # Early on only never-cut points are snapped; their commanded
            # depth is bounded by the floor and vetoed by refits before the
            # tip arrives. Once the record arc rings most of the circle the
            # fit is interpolating rather than extrapolating, and already
            # cut points may track it as well instead of closing the
            # remaining stock at the damped feed rate.
            trusted = contacted >= ctl.plane_trust_records
            want_fit = (
                untouched.any() or trusted or ctl.plane_offsets_all_points
            )
            if contacted >= 3 and want_fit:
                pts = np.column_stack(
                    (trajectory.x[mask], trajectory.y[mask], contact_z[mask])
                )
                fit = fit_plane(pts)
                if fit.valid and fit.sv_ratio >= ctl.plane_min_sv_ratio:
                    # Far from the contacted arc a single refit can land
                    # hundreds of micrometers below the real surface, and
                    # the monotone plan would latch the worst refit ever
                    # seen. Snapping follows the highest of the last few
                    # fits with distinct record sets, so a transient bad
                    # fit cannot command depth on its own.
                    if records_version != fits_version:
                        fit_hist.append(fit.height(trajectory.x, trajectory.y))
                        fits_version = records_version
                trusted = trusted and fit.valid and (
                    fit.sv_ratio >= ctl.plane_trust_sv
                )
                if len(fit_hist) == fit_hist.maxlen:
                    fit_top = np.maximum.reduce(list(fit_hist))
                    snap_target = np.maximum(fit_top, snap_floor)
                    target = snap_target
                    # The snap stops a little short of the target and the
                    # rest is closed at the nominal feed rate, so a fit (or
                    # floor) that sits slightly below the real surface over
                    # a thin patch cannot ram the tip through on arrival.
                    target += ctl.snap_standoff
                    if trusted and not ctl.plane_offsets_all_points:
                        # A trusted fit also commands already cut points a
                        # fixed bite below the fitted top. The bite leaves
                        # enough stock to absorb local surface waviness,
                        # thickness variation and fit error; the sensed
                        # damped feed removes the remainder.
                        shell = fit_top - ctl.snap_bite * tau_nominal
                        np.copyto(target, shell, where=~untouched)
                    offsets = target - trajectory.z
                    if not ctl.plane_offsets_all_points:
                        if not trusted:
                            offsets[~untouched] = 0.0
                        # No fresh snap inside the tip's approach quarter
                        # turn (the tip lands only on targets old enough for
                        # a few later refits to have vetoed them) nor right
                        # behind it, where the footprint still cuts.
                        dist = (trajectory.phi - theta) % TWO_PI
                        offsets[
                            (dist < 0.5 * math.pi)
                            | (dist > TWO_PI - 2.0 * state.footprint_halfwidth)
                        ] = 0.0
                    # Downward only, and rate limited: later refits must be
                    # able to correct a low target before the commanded
                    # point has traveled there.
                    np.clip(offsets, -ctl.max_snap_step, 0.0, out=offsets)
                    if not snap_active and offsets.any():
                        snap_active = True

        if _DEBUG_TAP is not None:  # TEMP DEBUG
            _DEBUG_TAP(t, theta, trajectory, snap_floor, offsets, contact_z, fit)
        np.copyto(guard, progress)
        for k in range(1, guard_reach + 1):
            np.maximum(guard, np.roll(progress, k), out=guard)
            np.maximum(guard, np.roll(progress, -k), out=guard)
        if snap_active:
            # Once snapping starts, untouched points descend blind only in
            # the half turn before the tip reaches them. A plan waiting on
            # its target otherwise sinks a full turn of feed below it
            # before the cut that would reveal the surface.
            blocked = (progress == 0.0) & (
                (trajectory.phi - theta) % TWO_PI >= math.pi
            )
            guard[blocked] = 1.0
        trajectory, curve = advance_plan(trajectory, guard, offsets, T, ctl.v_z)
        tip_z = eval_spline(curve, theta)
        apply_drill(state, tip_z, theta, T)
        off_ang = np.abs(((trajectory.phi - theta + math.pi) % TWO_PI) - math.pi)
        in_foot = off_ang <= state.footprint_halfwidth + 1e-12
        plan_at_cut[in_foot] = np.minimum(plan_at_cut[in_foot], tip_z)
        c_true = ground_truth_completion(state)

        if not criterion_met:
            done = int(np.count_nonzero(progress >= ctl.criterion_level))
            if done >= need_count:
                criterion_met = True
                criterion_time = t
                settle_left = settle_cycles

        plane_ok = fit is not None and fit.valid
        rows.append(
            (
                cycle,
                t,
                theta,
                tip_z,
                float(progress.min()),
                float(progress.mean()),
                criterion_met,
                state.ruptured,
                plane_ok,
                fit.alpha if plane_ok else 0.0,
                fit.beta if plane_ok else 0.0,
                fit.gamma if plane_ok else 0.0,
            )
        )

        if criterion_met:
            if settle_left == 0:
                break
            settle_left -= 1
        if state.max_overshoot > ctl.intervention_margin:
            intervened = True
            break

    removable = (
        int(np.count_nonzero(c_true >= ctl.removable_level)) >= removable_need
    )
    if intervened:
        classification = classify_outcome(False, True, removable)
    else:
        classification = classify_outcome(criterion_met, state.ruptured, removable)

    # Reported drilling time is the moment the stop decision was reached:
    # the criterion firing for completed runs, the abort or timeout for the
    # rest. The settle sweep after the criterion is a fixed finishing pass
    # and is excluded, the same way a retract move would be.
    if criterion_met and not intervened and criterion_time is not None:
        stop_time = criterion_time
    else:
        stop_time = t
    return RunOutcome(
        classification=classification,
        drilling_time_min=stop_time / 60.0,
        trace=Trace.from_rows(rows),
        criterion_met=criterion_met,
        criterion_time_min=None if criterion_time is None else criterion_time / 60.0,
        ruptured=state.ruptured,
        removable=removable,
        cycles=len(rows),
        max_overshoot_m=state.max_overshoot,
        rupture_index=state.rupture_index,
        final_progress=progress,
        final_truth=c_true,
        surface=surface,
    )
