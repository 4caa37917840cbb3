"""Stochastic stand-ins for the image and force completion recognizers.

Both models are calibrated: the image sensor's long-run mean absolute
percentage error equals its target, and the force sensor's probability of
landing within the 0.05 tolerance equals the affine accuracy law at each
prediction horizon. Errors are biased low on purpose. Progress tracking
keeps a running maximum, so symmetric noise would ratchet the estimates up
to the top of the noise band over thousands of readings; downward errors
keep the running maximum at or below the true value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .fusion import FORCE_RATE_HZ, FORCE_WINDOW, IMAGE_POINTS, AccuracyModel
from .spline import TWO_PI


@dataclass(frozen=True)
class WorldView:
    """What a recognizer may observe in one planning cycle."""

    c_true: np.ndarray  # (n,) true completion on the planning grid
    drill_angle: float  # rad
    current_index: int  # 0-based grid index under the drill


@runtime_checkable
class Recognizer(Protocol):
    """Anything that maps a world observation to completion estimates."""

    def estimate(self, view: WorldView) -> np.ndarray: ...


@dataclass(frozen=True)
class ImageSensorConfig:
    m: int = IMAGE_POINTS
    target_mape: float = 15.05  # %
    occlusion_halfwidth: float = 3.0 * TWO_PI / 320.0  # rad, drill plus shadow
    sharp_error_max: float = 0.01  # top of the sharp-frame relative error band
    wide_error_min: float = 0.25  # bottom of the degraded-frame band
    wide_error_max: float = 0.55  # top of the degraded-frame band

    def validate(self) -> None:
        if self.m < 1:
            raise ValueError("image sample count must be positive")
        if self.occlusion_halfwidth < 0.0:
            raise ValueError("occlusion halfwidth must be nonnegative")
        bands_ordered = (
            0.0 <= self.sharp_error_max <= self.wide_error_min <= self.wide_error_max
        )
        if not bands_ordered:
            raise ValueError("need 0 <= sharp_error_max <= wide_error_min <= wide_error_max")
        if self.wide_error_max >= 1.0:
            raise ValueError("relative errors must stay below 1")
        if not 0.0 <= self.sharp_probability() <= 1.0:
            raise ValueError("target MAPE is unreachable with these error bands")

    def sharp_probability(self) -> float:
        """Mixture weight of the sharp band that hits the MAPE target.

        Frame errors are a two-band mixture: sharp frames draw the relative
        error from U[0, sharp_error_max], degraded frames from
        U[wide_error_min, wide_error_max]. The weight solves
            p * mean_sharp + (1 - p) * mean_wide = target_mape / 100
        so the long-run MAPE equals the target exactly.
        """
        theta = self.target_mape / 100.0
        mean_sharp = 0.5 * self.sharp_error_max
        mean_wide = 0.5 * (self.wide_error_min + self.wide_error_max)
        span = mean_wide - mean_sharp
        if span <= 0.0:
            return 1.0 if theta == mean_sharp else math.inf
        return (mean_wide - theta) / span


@dataclass(frozen=True)
class ForceSensorConfig:
    K: int = FORCE_WINDOW
    f: float = FORCE_RATE_HZ  # Hz
    a: float = -7.94  # %/s
    b: float = 81.43  # %
    tolerance: float = 0.05  # completion units counted as accurate
    hit_error_min: float = 0.02  # floor of the accurate-draw error
    wide_error_max: float = 0.3  # magnitude bound of the miss distribution

    def validate(self) -> None:
        if self.K < 1 or self.f <= 0.0:
            raise ValueError("bad force window parameters")
        if not 0.0 <= self.hit_error_min <= self.tolerance:
            raise ValueError("hit error floor must be within the tolerance")
        if self.wide_error_max < self.tolerance:
            raise ValueError("miss distribution must be wider than the tolerance")

    def accuracy_model(self) -> AccuracyModel:
        return AccuracyModel(
            a=self.a, b=self.b, f=self.f, K=self.K, tolerance=self.tolerance
        )

    def hit_probability(self, dt: np.ndarray | float) -> np.ndarray:
        """Probability of drawing from the tolerance band at horizon dt.

        A miss draw still lands within the tolerance with probability
        tolerance/wide_error_max, so the band probability is solved from
            p_hit + (1 - p_hit) * tolerance/wide_error_max = acc(dt)/100
        making the empirical within-tolerance rate match the accuracy law
        exactly instead of overshooting it by the accidental-hit mass.
        """
        acc = self.accuracy_model().accuracy(dt) / 100.0
        p_wide = self.tolerance / self.wide_error_max if self.wide_error_max > 0 else 0.0
        return np.clip((acc - p_wide) / (1.0 - p_wide), 0.0, 1.0)


class ImageSensor:
    """Noisy ring camera with hold-last behavior under the drill's shadow.

    Frame quality is common mode: one relative error per frame scales every
    visible sample. Most frames land in the sharp band, so the running
    maximum kept by the progress tracker closes on the truth within a few
    frames once a point stops advancing; the rare degraded frames carry the
    bulk of the MAPE budget and are ignored by the maximum. Independent
    per-point noise would be much worse for the tracker at grid points
    between image samples, where the interpolated error mixes two draws
    that are rarely small in the same frame.
    """

    def __init__(
        self, config: ImageSensorConfig, rng: np.random.Generator, grid_phi: np.ndarray
    ):
        config.validate()
        n = grid_phi.shape[0]
        if n % config.m != 0:
            raise ValueError("image sample count must divide the grid size")
        self.config = config
        self.rng = rng
        self.step = n // config.m
        self.phi = np.asarray(grid_phi, dtype=float)[:: self.step]
        self.last_values = np.zeros(config.m)
        self.p_sharp = config.sharp_probability()

    def recognize(
        self, c_true: np.ndarray, drill_angle: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Return (m estimates, occlusion mask) for the current cycle."""
        truth = c_true[:: self.step]
        u = self.rng.random(2)  # fixed draw count keeps replays aligned
        cfg = self.config
        if u[0] < self.p_sharp:
            rel = u[1] * cfg.sharp_error_max
        else:
            rel = cfg.wide_error_min + u[1] * (cfg.wide_error_max - cfg.wide_error_min)
        reading = truth * (1.0 - rel)
        occluded = (
            np.abs((self.phi - drill_angle + math.pi) % TWO_PI - math.pi)
            <= self.config.occlusion_halfwidth
        )
        fresh = ~occluded
        self.last_values[fresh] = reading[fresh]
        return self.last_values.copy(), occluded

    def estimate(self, view: WorldView) -> np.ndarray:
        values, _ = self.recognize(view.c_true, view.drill_angle)
        return values


class ForceSensor:
    """Window predictor whose per-horizon accuracy follows the affine law."""

    def __init__(self, config: ForceSensorConfig, rng: np.random.Generator):
        config.validate()
        self.config = config
        self.rng = rng
        dt = np.arange(config.K) / config.f
        self.p_hit = np.asarray(config.hit_probability(dt))

    def recognize(self, c_true_window: np.ndarray) -> np.ndarray:
        """Estimates for the next K grid points given their true completion."""
        cfg = self.config
        k = c_true_window.shape[0]
        if k != cfg.K:
            raise ValueError(f"expected a window of {cfg.K} samples")
        hit = self.rng.random(k) < self.p_hit
        err_hit = self.rng.uniform(cfg.hit_error_min, cfg.tolerance, k)
        err_miss = self.rng.uniform(0.0, cfg.wide_error_max, k)
        err = np.where(hit, err_hit, err_miss)
        return np.clip(c_true_window - err, 0.0, 1.0)

    def window_indices(self, current_index: int, n: int) -> np.ndarray:
        return (current_index + np.arange(self.config.K)) % n

    def estimate(self, view: WorldView) -> np.ndarray:
        n = view.c_true.shape[0]
        window = view.c_true[self.window_indices(view.current_index, n)]
        return self.recognize(window)


def perfect_image_config(m: int = IMAGE_POINTS) -> ImageSensorConfig:
    """Noise-free image sensor (still occluded near the drill)."""
    return ImageSensorConfig(m=m, target_mape=0.0, sharp_error_max=0.0)


def perfect_force_config() -> ForceSensorConfig:
    """Force sensor that reports the exact truth."""
    return ForceSensorConfig(a=0.0, b=100.0, tolerance=0.0, hit_error_min=0.0)
