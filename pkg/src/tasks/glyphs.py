"""Deterministic synthetic glyphs for digits and the four operators.

Each symbol is a fixed set of strokes rasterized on a 28x28 canvas, then
jittered with a seeded rotation (up to 10 degrees), translation (up to 2
pixels) and Gaussian pixel noise (sigma 0.05), and clamped to [0, 1].
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import ndimage

from .symbols import DIVIDE, IMAGE_SIDE, MINUS, PLUS, TIMES, TaskDataError

MAX_ROTATION_DEG = 10.0
MAX_SHIFT_PX = 2.0
NOISE_SIGMA = 0.05
STROKE_RADIUS = 1.2

Polyline = list[tuple[float, float]]


def _ellipse(cx: float, cy: float, rx: float, ry: float, points: int = 24) -> Polyline:
    angles = np.linspace(0.0, 2.0 * np.pi, points + 1)
    return [(cx + rx * np.cos(a), cy + ry * np.sin(a)) for a in angles]


# Strokes in unit coordinates: x to the right, y downward.
STROKES: dict[int, list[Polyline]] = {
    0: [_ellipse(0.5, 0.5, 0.35, 0.48)],
    1: [[(0.3, 0.2), (0.55, 0.0), (0.55, 1.0)]],
    2: [
        [
            (0.15, 0.25),
            (0.3, 0.05),
            (0.7, 0.05),
            (0.85, 0.25),
            (0.8, 0.45),
            (0.15, 1.0),
            (0.9, 1.0),
        ]
    ],
    3: [
        [
            (0.15, 0.05),
            (0.85, 0.05),
            (0.45, 0.45),
            (0.85, 0.68),
            (0.72, 0.97),
            (0.15, 0.95),
        ]
    ],
    4: [[(0.7, 1.0), (0.7, 0.0), (0.1, 0.7), (0.95, 0.7)]],
    5: [
        [
            (0.85, 0.0),
            (0.2, 0.0),
            (0.15, 0.45),
            (0.7, 0.45),
            (0.88, 0.72),
            (0.7, 0.98),
            (0.15, 0.95),
        ]
    ],
    6: [[(0.75, 0.0), (0.3, 0.35), (0.17, 0.72)], _ellipse(0.5, 0.72, 0.33, 0.26)],
    7: [[(0.1, 0.0), (0.9, 0.0), (0.4, 1.0)]],
    8: [_ellipse(0.5, 0.26, 0.28, 0.23), _ellipse(0.5, 0.74, 0.34, 0.25)],
    9: [_ellipse(0.5, 0.28, 0.32, 0.26), [(0.82, 0.3), (0.6, 1.0)]],
    PLUS: [[(0.5, 0.15), (0.5, 0.85)], [(0.15, 0.5), (0.85, 0.5)]],
    MINUS: [[(0.15, 0.5), (0.85, 0.5)]],
    TIMES: [[(0.2, 0.2), (0.8, 0.8)], [(0.8, 0.2), (0.2, 0.8)]],
    DIVIDE: [
        [(0.15, 0.5), (0.85, 0.5)],
        [(0.5, 0.2), (0.5, 0.22)],
        [(0.5, 0.78), (0.5, 0.8)],
    ],
}


def _to_pixels(x: float, y: float) -> tuple[float, float]:
    return 6.0 + 16.0 * x, 4.0 + 20.0 * y


@lru_cache(maxsize=None)
def _base_glyph(symbol: int) -> np.ndarray:
    if symbol not in STROKES:
        raise TaskDataError(f"No glyph for symbol class {symbol}")
    ys, xs = np.mgrid[0:IMAGE_SIDE, 0:IMAGE_SIDE].astype(np.float64)
    points = np.stack([xs.ravel() + 0.5, ys.ravel() + 0.5], axis=1)
    distance = np.full(len(points), np.inf)
    for line in STROKES[symbol]:
        pixels = [np.array(_to_pixels(x, y)) for x, y in line]
        for a, b in zip(pixels[:-1], pixels[1:], strict=True):
            ab = b - a
            length2 = float(ab @ ab)
            if length2 == 0.0:
                t = np.zeros(len(points))
            else:
                t = np.clip((points - a) @ ab / length2, 0.0, 1.0)
            nearest = a + t[:, None] * ab
            distance = np.minimum(distance, np.linalg.norm(points - nearest, axis=1))
    image = np.clip(1.0 - (distance - STROKE_RADIUS), 0.0, 1.0)
    image.setflags(write=False)
    return image.reshape(IMAGE_SIDE, IMAGE_SIDE)


def render_glyph(symbol: int, seed: int) -> np.ndarray:
    """Seeded 28x28 image of ``symbol`` with values in [0, 1].

    The same (symbol, seed) always renders the same image.

    Raises:
        TaskDataError: If ``symbol`` is not a digit or operator class.
    """
    rng = np.random.default_rng(seed)
    image = np.array(_base_glyph(symbol))
    angle = rng.uniform(-MAX_ROTATION_DEG, MAX_ROTATION_DEG)
    offset = rng.uniform(-MAX_SHIFT_PX, MAX_SHIFT_PX, size=2)
    image = ndimage.rotate(image, angle, reshape=False, order=1, mode="constant")
    image = ndimage.shift(image, offset, order=1, mode="constant")
    image = image + rng.normal(0.0, NOISE_SIGMA, size=image.shape)
    return np.clip(image, 0.0, 1.0)
