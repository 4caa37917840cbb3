"""Synchronizing and fusing the two completion estimates.

The image estimate lives on a coarse m-point ring and is upsampled to the
n-point planning grid. The force estimate covers only the K grid points
ahead of the drill and is weighted by the accuracy law acc(dt) = a*dt + b,
which decays with prediction horizon. Fusion is a per-point convex blend
and overall progress is tracked as a running elementwise maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRID_POINTS = 320  # n, planning grid size
IMAGE_POINTS = 32  # m, image estimate size
FORCE_WINDOW = 80  # K, force prediction horizon in grid points
FORCE_RATE_HZ = 20.0  # f, force sample rate


@dataclass(frozen=True)
class AccuracyModel:
    """Affine accuracy law acc(dt) = a*dt + b in percent, clamped to [0, 100]."""

    a: float  # %/s, negative
    b: float  # %
    f: float = FORCE_RATE_HZ  # Hz
    K: int = FORCE_WINDOW
    tolerance: float = 0.05  # completion units counted as a hit

    def accuracy(self, dt: float | np.ndarray) -> float | np.ndarray:
        return np.clip(self.a * np.asarray(dt, dtype=float) + self.b, 0.0, 100.0)

    def window_weights(self) -> np.ndarray:
        """Weights for samples j = 0 .. K-1 at horizons dt = j/f."""
        dt = np.arange(self.K) / self.f
        return np.asarray(self.accuracy(dt)) / 100.0


def accuracy_weights(model: AccuracyModel, current_index: int, n: int = GRID_POINTS) -> np.ndarray:
    """Length-n force weight vector w2 for the window starting at current_index.

    current_index is 1-based. Positions current_index .. current_index+K-1
    (cyclic) carry acc(j/f)/100 for j starting at 0; all others are zero.
    """
    if not 1 <= current_index <= n:
        raise ValueError(f"current_index must be in [1, {n}]")
    if model.K > n:
        raise ValueError("force window cannot exceed the grid")
    w2 = np.zeros(n)
    idx = (current_index - 1 + np.arange(model.K)) % n
    w2[idx] = model.window_weights()
    return w2


def upsample_image(c_image: np.ndarray, n: int = GRID_POINTS) -> np.ndarray:
    """Periodic linear interpolation of m ring samples onto n grid points.

    m must divide n; the original samples reappear exactly at their grid
    positions.
    """
    c_image = np.asarray(c_image, dtype=float)
    m = c_image.shape[0]
    if m > n:
        raise ValueError("cannot upsample to fewer points")
    if n % m != 0:
        raise ValueError("image sample count must divide the grid size")
    left, right, wl, wr = _upsample_indices(m, n)
    return wl * c_image[left] + wr * c_image[right]


def _upsample_indices(m: int, n: int):
    """Cached (left, right, 1-frac, frac) arrays; called once per cycle."""
    cached = _UPSAMPLE_CACHE.get((m, n))
    if cached is None:
        step = n // m
        left = np.arange(n) // step
        frac = (np.arange(n) % step) / step
        right = (left + 1) % m
        cached = (left, right, 1.0 - frac, frac)
        _UPSAMPLE_CACHE[(m, n)] = cached
    return cached


_UPSAMPLE_CACHE: dict = {}


def fuse(c_image_up: np.ndarray, c_force_pad: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """Convex blend (1 - w2)*image + w2*force, clamped to [0, 1].

    Wherever w2 is exactly zero the image values pass through bit-identical.
    """
    c_image_up = np.asarray(c_image_up, dtype=float)
    c_force_pad = np.asarray(c_force_pad, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if not (c_image_up.shape == c_force_pad.shape == w2.shape):
        raise ValueError("fusion inputs must have equal length")
    # Algebraically (1 - w2)*image + w2*force; this form adds exactly zero
    # where w2 == 0, so untouched entries pass through bit-identical.
    fused = c_image_up + w2 * (c_force_pad - c_image_up)
    return np.clip(fused, 0.0, 1.0, out=fused)


def update_progress(previous: np.ndarray, new: np.ndarray) -> np.ndarray:
    """Monotone progress bar: elementwise maximum of the two vectors."""
    previous = np.asarray(previous, dtype=float)
    new = np.asarray(new, dtype=float)
    if previous.shape != new.shape:
        raise ValueError("progress vectors must have equal length")
    return np.maximum(previous, new)


def criterion_count(fraction: float, n: int) -> int:
    """Smallest integer count satisfying count >= fraction * n.

    Uses a tiny epsilon so representable-fraction products like 0.8 * 320
    resolve to the exact rational threshold (256) instead of rounding up.
    """
    return int(math.ceil(fraction * n - 1e-9))
