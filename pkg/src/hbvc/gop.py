"""Hierarchical GoP structure: frame types, references, levels, decode order.

Frames at multiples of the GoP size are intra coded. Every other frame ``t``
is predicted from the two decoded frames ``p = t - dt`` and ``f = t + dt``,
where ``dt`` is the largest power of two dividing ``t`` (mod GoP). Its
hierarchy level is ``log2(gop / dt)``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import InvalidGopError, ScheduleAlignmentError


class Kind(str, enum.Enum):
    INTRA = "I"
    BIDIR = "B"


@dataclass(frozen=True)
class CodingUnit:
    t: int
    kind: Kind
    p: Optional[int] = None
    f: Optional[int] = None
    delta: int = 0
    level: int = 0
    decode_rank: int = 0

    @property
    def is_intra(self) -> bool:
        return self.kind is Kind.INTRA

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass(frozen=True)
class GopSchedule:
    gop_size: int
    units: Tuple[CodingUnit, ...]

    @property
    def n_frames(self) -> int:
        return len(self.units)

    def by_frame(self) -> dict:
        return {u.t: u for u in self.units}

    def intra_frames(self) -> List[int]:
        return [u.t for u in self.units if u.is_intra]

    def segment(self, k: int) -> List[CodingUnit]:
        """Units of intra segment ``k``: frames ``[k*gop, (k+1)*gop]`` in decode order."""
        lo, hi = k * self.gop_size, (k + 1) * self.gop_size
        return [u for u in self.units if lo <= u.t <= hi]

    @property
    def n_segments(self) -> int:
        return (self.n_frames - 1) // self.gop_size

    def to_json(self) -> str:
        return json.dumps(
            {"gop_size": self.gop_size, "units": [u.to_dict() for u in self.units]}, indent=1
        )


@dataclass(frozen=True)
class RandomPath:
    leaf: int
    units: Tuple[CodingUnit, ...]

    @property
    def frames(self) -> List[int]:
        return [u.t for u in self.units]


def log2_exact(gop_size: int) -> int:
    if not isinstance(gop_size, (int, np.integer)) or gop_size < 1 or gop_size & (gop_size - 1):
        raise InvalidGopError(f"GoP size {gop_size!r} is not a power of two")
    return int(gop_size).bit_length() - 1


def reference_distance(gop_size: int, t: int) -> int:
    """Distance ``dt`` from ``t`` to both references; 0 for intra positions."""
    log2_exact(gop_size)
    r = t % gop_size
    if r == 0:
        return 0
    return r & -r


def hierarchy_level(gop_size: int, t: int) -> int:
    """``log2(gop / dt)`` for B positions, 0 for intra positions."""
    n = log2_exact(gop_size)
    if t < 0:
        raise InvalidGopError(f"negative frame index {t}")
    dt = reference_distance(gop_size, t)
    if dt == 0:
        return 0
    return n - (dt.bit_length() - 1)


def gop_for_fps(fps: float) -> int:
    """Intra period used for random-access testing: 32 at 30 fps, else 64."""
    return 32 if round(fps) == 30 else 64


def _unit(gop_size: int, t: int, rank: int = 0) -> CodingUnit:
    dt = reference_distance(gop_size, t)
    if dt == 0:
        return CodingUnit(t, Kind.INTRA, decode_rank=rank)
    return CodingUnit(t, Kind.BIDIR, t - dt, t + dt, dt, hierarchy_level(gop_size, t), rank)


def build_schedule(
    n_frames: int, gop_size: int, fps: Optional[float] = None, truncate: bool = False
) -> GopSchedule:
    """Canonical schedule for ``n_frames`` frames.

    ``gop_size=None`` picks it from ``fps``. Decode order: intra frames by
    ascending ``t``, then B-frames by level, ties by ascending ``t``.
    """
    if gop_size is None:
        if fps is None:
            raise InvalidGopError("either gop_size or fps is required")
        gop_size = gop_for_fps(fps)
    log2_exact(gop_size)
    if n_frames < 0:
        raise ScheduleAlignmentError("negative frame count")
    if n_frames and (n_frames - 1) % gop_size:
        if not truncate:
            raise ScheduleAlignmentError(
                f"{n_frames} frames do not fill whole GoPs of {gop_size} "
                f"(need n = 1 mod {gop_size}); pass truncate to drop the tail"
            )
        n_frames = (n_frames - 1) // gop_size * gop_size + 1
    keyed = sorted(range(n_frames), key=lambda t: (hierarchy_level(gop_size, t), t))
    units = tuple(_unit(gop_size, t, rank) for rank, t in enumerate(keyed))
    return GopSchedule(gop_size, units)


def path_for_leaf(gop_size: int, leaf: int) -> RandomPath:
    """Ancestors of ``leaf`` plus the leaf itself, in decode order."""
    n = log2_exact(gop_size)
    if not 0 < leaf < gop_size or leaf % 2 == 0:
        raise InvalidGopError(f"{leaf} is not a non-reference frame of GoP {gop_size}")
    units = []
    for k in range(1, n + 1):
        dt = gop_size >> k
        p = leaf // (2 * dt) * (2 * dt)
        units.append(_unit(gop_size, p + dt, k - 1))
    return RandomPath(leaf, tuple(units))


def sample_random_path(gop_size: int, seed) -> RandomPath:
    """Uniformly pick one odd offset of the GoP and return its path.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    n = log2_exact(gop_size)
    if n < 1:
        raise InvalidGopError("random paths need gop_size >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    leaf = 2 * int(rng.integers(0, gop_size // 2)) + 1
    return path_for_leaf(gop_size, leaf)


def enumerate_leaves(gop_size: int) -> List[RandomPath]:
    n = log2_exact(gop_size)
    if n < 1 or gop_size > 64:
        raise InvalidGopError("enumeration supports 2 <= gop_size <= 64")
    return [path_for_leaf(gop_size, leaf) for leaf in range(1, gop_size, 2)]
