"""Deterministic synthetic test clips."""

from __future__ import annotations

from typing import List

import numpy as np

from .frame_io import Frame

CLIP_KINDS = ("static", "pan", "noise")


def _texture(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth random texture with some edges, float in [0, 255]."""
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.full((h, w), 128.0)
    for _ in range(6):
        fy, fx = rng.uniform(0.02, 0.15, 2)
        ph = rng.uniform(0, 2 * np.pi)
        img += rng.uniform(10, 30) * np.sin(fx * xx + fy * yy + ph)
    for _ in range(4):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(6, 20)
        img += rng.uniform(-50, 50) * (((yy - cy) ** 2 + (xx - cx) ** 2) < r * r)
    return np.clip(img, 0, 255)


def _to_frame(luma: np.ndarray, t: int) -> Frame:
    y = np.clip(np.rint(luma), 0, 255).astype(np.uint8)
    small = luma.reshape(luma.shape[0] // 2, 2, luma.shape[1] // 2, 2).mean(axis=(1, 3))
    u = np.clip(np.rint(0.5 * small + 64), 0, 255).astype(np.uint8)
    v = np.clip(np.rint(192 - 0.4 * small), 0, 255).astype(np.uint8)
    return Frame(y, u, v, 8, t)


def make_clip(kind: str, n_frames: int = 65, size: int = 128, seed: int = 0) -> List[Frame]:
    """``static``: one textured frame repeated with mild sensor noise.
    ``pan``: the texture translating by (1.5, 0.75) px per frame.
    ``noise``: independent uniform noise every frame.
    """
    rng = np.random.default_rng(seed)
    if kind == "noise":
        return [_to_frame(rng.uniform(0, 255, (size, size)), t) for t in range(n_frames)]
    if kind == "static":
        base = _texture(size, size, rng)
        return [_to_frame(base + rng.normal(0, 1.0, base.shape), t) for t in range(n_frames)]
    if kind == "pan":
        margin = int(np.ceil(1.5 * n_frames)) + 4
        big = _texture(size + margin, size + margin, rng)
        out = []
        for t in range(n_frames):
            dx, dy = 1.5 * t, 0.75 * t
            ix, iy = int(dx), int(dy)
            fx, fy = dx - ix, dy - iy
            win = big[iy : iy + size + 1, ix : ix + size + 1]
            # bilinear sub-pixel shift
            a = (1 - fx) * win[:, :-1] + fx * win[:, 1:]
            a = (1 - fy) * a[:-1] + fy * a[1:]
            out.append(_to_frame(a, t))
        return out
    raise ValueError(f"unknown clip kind {kind!r}; choose from {CLIP_KINDS}")
