"""Target sets: finite unions of closed boxes in R^M."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# relative slack on box faces: the same ratio computed along different
# summation orders can land an ulp outside a closed face
SLACK = 1e-12


@dataclass(frozen=True)
class TargetSet:
    """Union of closed boxes, each stored as ``(lo, hi)`` tuples of length ``dim``.

    ``whole=True`` stands for all of R^M (no constraint).
    """

    boxes: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]
    dim: int = 1
    whole: bool = False

    def __post_init__(self):
        if self.whole:
            return
        for lo, hi in self.boxes:
            if len(lo) != self.dim or len(hi) != self.dim:
                raise ValueError("box dimension mismatch")
            if any(a > b for a, b in zip(lo, hi)):
                raise ValueError(f"box with lo > hi: {lo}, {hi}")

    # constructors

    @classmethod
    def everything(cls, dim: int = 1) -> "TargetSet":
        return cls((), dim, whole=True)

    @classmethod
    def empty(cls, dim: int = 1) -> "TargetSet":
        return cls((), dim)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "TargetSet":
        return cls((((float(lo),), (float(hi),)),), 1)

    @classmethod
    def box(cls, lo, hi) -> "TargetSet":
        lo = tuple(float(x) for x in np.atleast_1d(lo))
        hi = tuple(float(x) for x in np.atleast_1d(hi))
        return cls(((lo, hi),), len(lo))

    @classmethod
    def singleton(cls, point) -> "TargetSet":
        return cls.box(point, point)

    @classmethod
    def ball(cls, point, r: float) -> "TargetSet":
        return cls.singleton(point).inflate(r)

    @classmethod
    def parse(cls, text: str, dim: int = 1) -> "TargetSet":
        """``"lo,hi[;lo,hi...]"``.

        In one dimension each pair is an interval of the union; for ``dim > 1``
        the pairs are the coordinate ranges of a single box.
        """
        text = text.strip()
        if text.lower() in ("all", "r", "whole"):
            return cls.everything(dim)
        try:
            pairs = [tuple(float(x) for x in part.split(",")) for part in text.split(";") if part.strip()]
        except ValueError as exc:
            raise ConfigError(f"target: cannot parse {text!r}") from exc
        if not pairs or any(len(p) != 2 for p in pairs):
            raise ConfigError(f"target: expected lo,hi pairs, got {text!r}")
        if any(lo > hi for lo, hi in pairs):
            raise ConfigError(f"target: lo > hi in {text!r}")
        if dim == 1:
            return cls(tuple(((lo,), (hi,)) for lo, hi in pairs), 1)
        if len(pairs) != dim:
            raise ConfigError(f"target: need {dim} coordinate ranges, got {len(pairs)}")
        return cls.box([p[0] for p in pairs], [p[1] for p in pairs])

    # geometry

    @property
    def is_empty(self) -> bool:
        return not self.whole and not self.boxes

    @property
    def convex(self) -> bool:
        return self.whole or len(self.boxes) == 1

    def inflate(self, r: float) -> "TargetSet":
        """B(C, r) in the max-norm (closed)."""
        if r < 0:
            raise ValueError("radius must be >= 0")
        if self.whole:
            return self
        return TargetSet(tuple((tuple(a - r for a in lo), tuple(b + r for b in hi))
                               for lo, hi in self.boxes), self.dim)

    def has_interior(self) -> bool:
        return self.whole or any(all(a < b for a, b in zip(lo, hi)) for lo, hi in self.boxes)

    def contains_point(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(self.contains_interval(x[None, :], x[None, :])[0])

    def contains_interval(self, lo, hi) -> np.ndarray:
        """Vectorised test that the box [lo, hi] (rows) lies inside the set.

        ``lo``/``hi`` have shape (N,) in one dimension or (N, M).
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim == 1:
            lo, hi = lo[:, None], hi[:, None]
        if self.whole:
            return np.ones(lo.shape[0], dtype=bool)
        out = np.zeros(lo.shape[0], dtype=bool)
        for blo, bhi in self.boxes:
            blo, bhi = np.asarray(blo), np.asarray(bhi)
            a = blo - SLACK * (1 + np.abs(blo))
            b = bhi + SLACK * (1 + np.abs(bhi))
            out |= np.all((lo >= a) & (hi <= b), axis=1)
        return out

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounding box of the union."""
        if self.whole:
            return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)
        if not self.boxes:
            raise ValueError("empty target has no bounds")
        lo = np.min([b[0] for b in self.boxes], axis=0)
        hi = np.max([b[1] for b in self.boxes], axis=0)
        return lo, hi

    def __str__(self):
        if self.whole:
            return "R^%d" % self.dim
        if not self.boxes:
            return "{}"
        if self.dim == 1:
            return " U ".join(f"[{lo[0]:.15g}, {hi[0]:.15g}]" for lo, hi in self.boxes)
        return " U ".join("x".join(f"[{a:.15g}, {b:.15g}]" for a, b in zip(lo, hi)) for lo, hi in self.boxes)
