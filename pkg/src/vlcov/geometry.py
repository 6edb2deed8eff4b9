"""
Geometry of the room floor and of the reflection-image rings.

The room floor is the square S(0, a). Reflection images of order k live in the ring F_k, the union of the 4k
room-sized squares translated by 2a * (i, j) with |i| + |j| = k. Everything the analytic engine integrates over is a
union of such squares, seen from the receiver (so translated by -y), optionally clipped by a disk centred at the
receiver.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

Point = Tuple[float, float]
"""A point (or vector) in the plane, in meters."""


class InvalidLocationError(ValueError):
    """Raised when a receiver location lies outside the room."""


@dataclass(frozen=True)
class Square:
    """
    A closed axis-aligned square S(center, half_side).
    """

    center: Point
    """The center of the square"""
    half_side: float
    """Half of the side length, the `a` in S(x, a)"""

    def __post_init__(self) -> None:
        assert self.half_side > 0, f"A square needs a positive half side, got {self.half_side}"

    def bounds(self) -> Tuple[float, float, float, float]:
        """
        :returns: (x_min, x_max, y_min, y_max)
        """
        cx, cy = self.center
        a = self.half_side
        return cx - a, cx + a, cy - a, cy + a

    def contains(self, p: Point) -> bool:
        return max(abs(p[0] - self.center[0]), abs(p[1] - self.center[1])) <= self.half_side

    def area(self) -> float:
        return (2 * self.half_side) ** 2


@dataclass(frozen=True)
class Disk:
    """A closed disk. The radius may be math.inf, in which case it does not clip anything."""

    center: Point
    radius: float

    def __post_init__(self) -> None:
        assert self.radius >= 0, f"The radius of a disk cannot be negative, got {self.radius}"

    def contains(self, p: Point) -> bool:
        return math.hypot(p[0] - self.center[0], p[1] - self.center[1]) <= self.radius


@dataclass(frozen=True)
class RingOffsets:
    """The lattice offsets 2a * G_k of the squares making up reflection ring k."""

    order: int
    offsets: Tuple[Point, ...]

    def __len__(self) -> int:
        return len(self.offsets)


@dataclass(frozen=True)
class Region:
    """
    A union of interior-disjoint squares, optionally intersected with a disk.
    This is the domain of every spatial integral of the analytic engine.
    """

    squares: Tuple[Square, ...]
    clip_disk: Optional[Disk] = None

    def contains(self, p: Point) -> bool:
        if self.clip_disk is not None and not self.clip_disk.contains(p):
            return False
        return any(square.contains(p) for square in self.squares)

    def is_empty(self) -> bool:
        return len(self.squares) == 0 or (self.clip_disk is not None and self.clip_disk.radius == 0)

    def clipped(self, disk: Optional[Disk]) -> 'Region':
        """
        Intersect this region with a disk. An infinite disk leaves the region unclipped and None (the empty signal
        radius) gives the empty region.

        :param disk: the disk to clip with, or None for "nothing survives"
        :returns: the clipped region
        """
        if disk is None:
            return Region(squares=())
        if math.isinf(disk.radius):
            return self
        assert self.clip_disk is None, "Regions are clipped at most once"
        return Region(squares=self.squares, clip_disk=disk)

    def __repr__(self) -> str:
        return f"Region(squares={len(self.squares)}, clip_disk={self.clip_disk})"


def ring_offsets(k: int, a: float) -> RingOffsets:
    """
    All offsets 2a * (i, j) with integer i, j and |i| + |j| = k.

    :param k: the reflection order, k >= 0
    :param a: the half side of the room
    :returns: {(0, 0)} for k = 0, exactly 4k distinct offsets otherwise
    """
    assert k >= 0, f"The reflection order cannot be negative, got {k}"
    assert a > 0, f"The room half side must be positive, got {a}"
    offsets: list[Point] = []
    for i in range(-k, k + 1):
        rest = k - abs(i)
        js = [0] if rest == 0 else [-rest, rest]
        for j in js:
            offsets.append((2 * a * i, 2 * a * j))
    return RingOffsets(order=k, offsets=tuple(offsets))


def check_location(y: Point, a: float) -> None:
    """
    :raises InvalidLocationError: when y is not on the floor S(0, a)
    """
    slack = 1e-12 * a
    if abs(y[0]) > a + slack or abs(y[1]) > a + slack:
        raise InvalidLocationError(f"The location {y} is outside the room of half side {a}")


def ring_region(k: int, y: Point, a: float) -> Region:
    """
    The ring F_k(-y, a): ring k as seen from a receiver at y, i.e. translated by -y.

    :param k: the reflection order
    :param y: the receiver location on the floor
    :param a: the half side of the room
    :raises InvalidLocationError: when y is outside the room
    """
    check_location(y, a)
    squares = tuple(Square(center=(ox - y[0], oy - y[1]), half_side=a) for ox, oy in ring_offsets(k, a).offsets)
    return Region(squares=squares)


def rings_up_to(K: int, y: Point, a: float) -> Tuple[Region, ...]:
    """The regions F_0(-y, a), ..., F_K(-y, a)."""
    return tuple(ring_region(k, y, a) for k in range(K + 1))


def lowest_ring_order(p: Point, y: Point, a: float) -> int:
    """
    The reflection order of the ring containing p, seen from a receiver at y.
    Points on a shared boundary belong to the ring with the lowest order.
    """
    best: Optional[int] = None
    u = (p[0] + y[0]) / (2 * a)
    v = (p[1] + y[1]) / (2 * a)
    for i in {math.floor(u + 0.5), math.ceil(u - 0.5)}:
        for j in {math.floor(v + 0.5), math.ceil(v - 0.5)}:
            order = abs(i) + abs(j)
            if best is None or order < best:
                best = order
    assert best is not None
    return best


def signal_radius(k: int, tau: float, sigma2: float, eta: float, beta: float, h: float) -> Optional[float]:
    """
    The radius a_D^(k) around the receiver outside of which a transmitter of order k cannot beat the noise at
    threshold tau, [eta^(k/beta) (tau sigma2)^(-1/beta) - h^2]^(1/2).

    :param k: the reflection order (eta is irrelevant for k = 0)
    :param tau: the SINR threshold, at least 1
    :param sigma2: the effective noise, 0 gives an infinite radius
    :param eta: the wall reflection coefficient
    :param beta: the path-loss exponent
    :param h: the ceiling height
    :returns: the radius, math.inf when there is no noise, or None when the region is empty
    """
    if tau < 1:
        raise ValueError(f"The signal radius is only meaningful for thresholds tau >= 1, got {tau}")
    assert beta > 0 and h >= 0 and sigma2 >= 0
    if k > 0 and eta == 0:
        return None
    if sigma2 == 0:
        return math.inf
    attenuation = eta ** (k / beta) if k > 0 else 1.0
    bracket = attenuation * (tau * sigma2) ** (-1 / beta) - h * h
    if bracket <= 0:
        return None
    return math.sqrt(bracket)


def _quadrant_disk_area(x: np.ndarray, y: np.ndarray, radius: float) -> np.ndarray:
    """Signed area of the rectangle between the origin and (x, y) inside the disk B(0, radius)."""
    sign = np.sign(x) * np.sign(y)
    x = np.minimum(np.abs(x), radius)
    y = np.minimum(np.abs(y), radius)

    def primitive(u: np.ndarray) -> np.ndarray:
        # integral of sqrt(R^2 - s^2) from 0 to u
        return 0.5 * (u * np.sqrt(np.maximum(radius * radius - u * u, 0.0)) + radius * radius * np.arcsin(u / radius))

    crossing = np.sqrt(np.maximum(radius * radius - y * y, 0.0))
    flat = np.minimum(crossing, x)
    area = y * flat + primitive(x) - primitive(flat)
    return sign * area


def square_disk_area(square: Square, disk: Disk) -> float:
    """
    Exact area of a square intersected with a disk, by decomposing the square into four signed
    corner rectangles anchored at the disk center.
    """
    x0, x1, y0, y1 = square.bounds()
    if math.isinf(disk.radius):
        return square.area()
    if disk.radius == 0:
        return 0.0
    cx, cy = disk.center
    xs = np.array([x1, x0, x1, x0]) - cx
    ys = np.array([y1, y1, y0, y0]) - cy
    parts = _quadrant_disk_area(xs, ys, disk.radius)
    return float(parts[0] - parts[1] - parts[2] + parts[3])


def area(region: Region, tol: float = 1e-12) -> float:
    """
    Area of a region. The square-disk intersections are evaluated in closed form, so `tol` is an upper bound that
    is always met.

    :param region: the region
    :param tol: the accepted relative tolerance
    :returns: the area in m^2
    """
    assert tol > 0
    if region.clip_disk is None:
        return sum(square.area() for square in region.squares)
    disk = region.clip_disk
    return sum(square_disk_area(square, disk) for square in region.squares)


def _arc_angle(bounds: Tuple[float, float, float, float], r: np.ndarray) -> np.ndarray:
    """The angle (radians) of the circle |x| = r lying inside the closed rectangle `bounds`."""
    x0, x1, y0, y1 = bounds
    rr = np.maximum(r, 1e-300)[:, None]
    candidates = [np.zeros_like(rr), np.full_like(rr, 2 * math.pi)]
    for c in (x0, x1):
        ratio = c / rr
        valid = np.abs(ratio) <= 1
        base = np.arccos(np.clip(ratio, -1.0, 1.0))
        candidates.append(np.where(valid, base, 0.0))
        candidates.append(np.where(valid, 2 * math.pi - base, 0.0))
    for c in (y0, y1):
        ratio = c / rr
        valid = np.abs(ratio) <= 1
        base = np.arcsin(np.clip(ratio, -1.0, 1.0))
        candidates.append(np.where(valid, np.mod(base, 2 * math.pi), 0.0))
        candidates.append(np.where(valid, math.pi - base, 0.0))
    angles = np.sort(np.concatenate(candidates, axis=1), axis=1)
    middle = 0.5 * (angles[:, 1:] + angles[:, :-1])
    px = rr * np.cos(middle)
    py = rr * np.sin(middle)
    slack = 1e-12 * rr
    inside = (px >= x0 - slack) & (px <= x1 + slack) & (py >= y0 - slack) & (py <= y1 + slack)
    return np.sum(np.where(inside, np.diff(angles, axis=1), 0.0), axis=1)


def arc_length(region: Region, r: np.ndarray) -> np.ndarray:
    """
    The length of the circle of radius r centred at the origin inside the region, L(r).
    For any f, the integral of f(|x|) over the region equals the integral of f(r) L(r) dr.
    The clip disk, if any, must be centred at the origin.

    :param region: the region, seen from the receiver
    :param r: radii, any shape
    :returns: L(r), same shape as r
    """
    r = np.asarray(r, dtype=float)
    flat = r.reshape(-1)
    total = np.zeros_like(flat)
    for square in region.squares:
        total += _arc_angle(square.bounds(), flat)
    total *= flat
    if region.clip_disk is not None:
        assert region.clip_disk.center == (0.0, 0.0) or region.clip_disk.center == (0, 0), \
            "Radial reduction needs a clip disk centred at the receiver"
        total = np.where(flat <= region.clip_disk.radius, total, 0.0)
    return total.reshape(r.shape)


def radial_breakpoints(region: Region) -> np.ndarray:
    """
    The radii at which L(r) of the region is not smooth: tangencies with the lines through the edges, corners,
    and the clip radius. The first and last entries bound the radii where L(r) can be nonzero.

    :returns: sorted unique radii, empty for an empty region
    """
    if region.is_empty():
        return np.zeros(0)
    points: list[float] = []
    lowest = math.inf
    highest = 0.0
    for square in region.squares:
        x0, x1, y0, y1 = square.bounds()
        points.extend(abs(c) for c in (x0, x1, y0, y1))
        corners = [math.hypot(x, y) for x in (x0, x1) for y in (y0, y1)]
        points.extend(corners)
        dx = max(x0, 0.0, -x1)
        dy = max(y0, 0.0, -y1)
        lowest = min(lowest, math.hypot(dx, dy))
        highest = max(highest, max(corners))
    if region.clip_disk is not None:
        highest = min(highest, region.clip_disk.radius)
        points.append(region.clip_disk.radius)
    if lowest >= highest:
        return np.zeros(0)
    values = np.unique(np.array([lowest, highest] + points))
    return values[(values >= lowest) & (values <= highest)]


def mirror_coordinate(value: np.ndarray, index: int, a: float) -> np.ndarray:
    """
    The image of a coordinate after reflecting |index| times across the walls at +-a, landing in the cell centred at
    2a * index: 2a * index + (-1)^index * value.
    """
    sign = -1.0 if index % 2 else 1.0
    return 2 * a * index + sign * np.asarray(value, dtype=float)
