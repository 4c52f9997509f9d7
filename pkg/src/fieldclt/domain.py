"""Axis-aligned integer boxes and their unit-lattice stratification."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True, order=True)
class Stratum:
    """Open face of the unit lattice.

    Points x with anchor[i] < x[i] < anchor[i] + 1 along the free axes and
    x[j] = anchor[j] along the remaining ones.
    """

    anchor: tuple[int, ...]
    free_axes: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.free_axes)

    @property
    def fixed_axes(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.anchor)) if i not in self.free_axes)

    def contains(self, x, tol: float = 0.0) -> bool:
        """True if x lies in the closure of the face, up to tol."""
        x = np.asarray(x, dtype=float)
        for i, a in enumerate(self.anchor):
            if i in self.free_axes:
                if x[i] < a - tol or x[i] > a + 1 + tol:
                    return False
            elif abs(x[i] - a) > tol:
                return False
        return True

    def in_closure_of_cube(self, v) -> bool:
        for i, a in enumerate(self.anchor):
            if i in self.free_axes:
                if a != v[i]:
                    return False
            elif a not in (v[i], v[i] + 1):
                return False
        return True


@dataclass(frozen=True)
class BoxDomain:
    """Closed box [lower, upper] with integer corners."""

    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(int(round(v)) for v in self.lower)
        hi = tuple(int(round(v)) for v in self.upper)
        if any(abs(a - b) > 1e-12 for a, b in zip(lo + hi, tuple(self.lower) + tuple(self.upper))):
            raise ValueError("box corners must be integers")
        if len(lo) != len(hi) or not lo:
            raise ValueError("corner dimensions differ")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("upper corner must exceed lower corner")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, R: int, d: int) -> "BoxDomain":
        """The cube [-R, R]^d."""
        return cls((-R,) * d, (R,) * d)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.lower, self.upper))

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def aspect_ratio(self) -> float:
        return min(self.sides) / max(self.sides)

    def translated(self, offset) -> "BoxDomain":
        off = tuple(int(o) for o in offset)
        return BoxDomain(tuple(a + o for a, o in zip(self.lower, off)),
                         tuple(b + o for b, o in zip(self.upper, off)))

    def grid_shape(self, h: float) -> tuple[int, ...]:
        return tuple(grid_count(s, h) + 1 for s in self.sides)

    def grid_axes(self, h: float) -> list[np.ndarray]:
        return [a + h * np.arange(n) for a, n in zip(self.lower, self.grid_shape(h))]

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.asarray(self.lower) - tol) and np.all(x <= np.asarray(self.upper) + tol))

    def contains_box(self, other: "BoxDomain") -> bool:
        return all(a <= c and d <= b for a, b, c, d in
                   zip(self.lower, self.upper, other.lower, other.upper))

    def cubes(self) -> list[tuple[int, ...]]:
        """Unit cubes v + [0,1]^d making up the box, in lexicographic order."""
        ranges = [range(a, b) for a, b in zip(self.lower, self.upper)]
        return list(itertools.product(*ranges))

    @cached_property
    def _strata(self) -> tuple[Stratum, ...]:
        d = self.dimension
        out = []
        for m in range(d + 1):
            for free in itertools.combinations(range(d), m):
                ranges = [range(a, b) if i in free else range(a, b + 1)
                          for i, (a, b) in enumerate(zip(self.lower, self.upper))]
                for anchor in itertools.product(*ranges):
                    out.append(Stratum(anchor, free))
        return tuple(out)

    def strata(self, dim: int | None = None) -> list[Stratum]:
        """All open lattice faces partitioning the closed box, lowest dimension first."""
        if dim is None:
            return list(self._strata)
        return [s for s in self._strata if s.dim == dim]

    def strata_of_cube(self, v) -> list[Stratum]:
        """Faces making up the closed cube B_v (which must lie in the box)."""
        d = self.dimension
        out = []
        for m in range(d + 1):
            for free in itertools.combinations(range(d), m):
                choices = [(v[i],) if i in free else (v[i], v[i] + 1) for i in range(d)]
                for anchor in itertools.product(*choices):
                    out.append(Stratum(anchor, free))
        return out

    def vertices(self) -> np.ndarray:
        return np.array([s.anchor for s in self.strata(0)], dtype=float)

    def split(self, axis: int = 0) -> tuple["BoxDomain", "BoxDomain"]:
        """Two halves sharing the interface at the integer midpoint of one axis."""
        a, b = self.lower[axis], self.upper[axis]
        if b - a < 2:
            raise ValueError("box too thin to split")
        mid = (a + b) // 2
        up1 = list(self.upper)
        up1[axis] = mid
        lo2 = list(self.lower)
        lo2[axis] = mid
        return BoxDomain(self.lower, tuple(up1)), BoxDomain(tuple(lo2), self.upper)


def grid_count(length: float, h: float) -> int:
    """Number of h-steps in an integer length; h must divide 1."""
    k = 1.0 / h
    if abs(k - round(k)) > 1e-9:
        raise ValueError(f"1/h must be an integer, got h={h}")
    return int(round(length * round(k)))
