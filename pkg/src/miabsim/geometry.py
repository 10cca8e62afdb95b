"""Manhattan-grid layout and slot-by-slot mobility of buses and pedestrians.

Buses drive on lane centerlines of a 4x4 lattice of streets; pedestrians walk
on a 6x6 lattice of sidewalk centerlines and cross streets only next to the
street-crossing squares. Both draw a manoeuvre (straight 0.6, left 0.2,
right 0.2) on every intersection entry, restricted to options that keep them
on the grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class GeometryError(RuntimeError):
    pass


class Turn(enum.IntEnum):
    STRAIGHT = 0
    LEFT = 1
    RIGHT = 2


TURN_PROBS = (0.6, 0.2, 0.2)

BUS_LENGTH_M = 12.0
BUS_WIDTH_M = 2.5
BUS_HEIGHT_M = 3.0
# local bus frame: x forward from the body centre, y to the left, z up
DU_OFFSET = (-5.5, 0.0, 2.5)
MT_OFFSET = (-5.5, 0.0, 3.5)
SEAT_ROWS = 10
SEAT_COLS = 2


def seat_offsets(height_m: float = 1.8) -> list[tuple[float, float, float]]:
    """The 2x10 seat grid inside the bus body, rear to front."""
    seats = []
    for row in range(SEAT_ROWS):
        for col in range(SEAT_COLS):
            seats.append((-4.5 + row * 1.0, -0.7 + 1.4 * col, height_m))
    return seats


@dataclass(frozen=True)
class GridLayout:
    block_side_m: float = 120.0
    sidewalk_width_m: float = 3.0
    street_width_m: float = 14.0
    blocks_per_side: int = 3
    lanes_per_direction: int = 2

    @property
    def pitch_m(self) -> float:
        return self.block_side_m + 2 * self.sidewalk_width_m + self.street_width_m

    @property
    def extent_m(self) -> float:
        return self.blocks_per_side * (self.block_side_m + 2 * self.sidewalk_width_m) + (
            self.blocks_per_side + 1) * self.street_width_m

    @property
    def center(self) -> tuple[float, float]:
        c = self.extent_m / 2
        return (c, c)

    @property
    def street_centers(self) -> np.ndarray:
        return self.street_width_m / 2 + self.pitch_m * np.arange(self.blocks_per_side + 1)

    @property
    def lane_offsets(self) -> tuple[float, ...]:
        w = self.street_width_m / (2 * self.lanes_per_direction)
        return tuple(w / 2 + k * w for k in range(self.lanes_per_direction))

    @property
    def walk_lines(self) -> np.ndarray:
        """Sidewalk centerline coordinates (same set on both axes)."""
        half = self.street_width_m / 2 + self.sidewalk_width_m / 2
        c = self.street_centers
        lines = [c[0] + half] + [x for k in c[1:-1] for x in (k - half, k + half)] + [c[-1] - half]
        return np.array(lines)

    def block_interior(self, i: int, j: int) -> tuple[float, float, float, float]:
        x0 = self.street_width_m + self.sidewalk_width_m + i * self.pitch_m
        y0 = self.street_width_m + self.sidewalk_width_m + j * self.pitch_m
        return (x0, y0, x0 + self.block_side_m, y0 + self.block_side_m)

    def in_bounds(self, x: float, y: float) -> bool:
        return -1e-9 <= x <= self.extent_m + 1e-9 and -1e-9 <= y <= self.extent_m + 1e-9

    def in_street(self, c: float) -> bool:
        h = self.street_width_m / 2
        return bool(np.any(np.abs(self.street_centers - c) <= h + 1e-9))

    def in_crossing_cell(self, x: float, y: float) -> bool:
        """Street-crossing square widened by the sidewalk (crosswalks)."""
        h = self.street_width_m / 2 + self.sidewalk_width_m
        c = self.street_centers
        return bool(np.any(np.abs(c - x) <= h + 1e-9) and np.any(np.abs(c - y) <= h + 1e-9))

    def on_sidewalk(self, x: float, y: float) -> bool:
        for i in range(self.blocks_per_side):
            for j in range(self.blocks_per_side):
                x0, y0, x1, y1 = self.block_interior(i, j)
                s = self.sidewalk_width_m + 1e-9
                inside_outer = x0 - s <= x <= x1 + s and y0 - s <= y <= y1 + s
                inside_block = x0 < x < x1 and y0 < y < y1
                if inside_outer and not inside_block:
                    return True
        return False


_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def right_of(d: tuple[int, int]) -> tuple[int, int]:
    return (d[1], -d[0])


def turn_heading(d: tuple[int, int], turn: Turn) -> tuple[int, int]:
    if turn is Turn.STRAIGHT:
        return d
    r = right_of(d)
    return r if turn is Turn.RIGHT else (-r[0], -r[1])


def draw_turn(rng: np.random.Generator, feasible: tuple[bool, bool, bool] = (True, True, True)) -> Turn:
    """Draw a manoeuvre; infeasible options are removed and the rest renormalised."""
    w = np.array([p if ok else 0.0 for p, ok in zip(TURN_PROBS, feasible)])
    if w.sum() <= 0:
        raise GeometryError("no feasible manoeuvre")
    u = rng.random() * w.sum()
    acc = 0.0
    for t, p in zip(Turn, w):
        acc += p
        if u < acc:
            return t
    return Turn(int(np.flatnonzero(w)[-1]))


@dataclass
class Walker:
    """A mobile moving along a rectilinear lattice.

    ``node`` is the lattice node being approached (or currently crossed),
    ``t`` the signed distance to it along ``heading``. ``offset`` shifts the
    path to the right of the lattice line (lane for buses, 0 for pedestrians).
    """

    lattice: np.ndarray
    node: tuple[int, int]
    heading: tuple[int, int]
    t: float
    speed_mps: float
    height_m: float
    offset: float = 0.0
    entry_margin: float = 0.0
    pending_turn: Turn | None = None
    turned: bool = False
    intersection_events: int = 0

    def position(self) -> np.ndarray:
        nx, ny = self.lattice[self.node[0]], self.lattice[self.node[1]]
        r = right_of(self.heading)
        x = nx + self.t * self.heading[0] + self.offset * r[0]
        y = ny + self.t * self.heading[1] + self.offset * r[1]
        return np.array([x, y, self.height_m])

    def heading_vector(self) -> np.ndarray:
        return np.array([float(self.heading[0]), float(self.heading[1])])

    def _next_node(self, d: tuple[int, int]) -> tuple[int, int] | None:
        i, j = self.node[0] + d[0], self.node[1] + d[1]
        n = len(self.lattice)
        if 0 <= i < n and 0 <= j < n:
            return (i, j)
        return None

    def _spacing(self, a: tuple[int, int], b: tuple[int, int]) -> float:
        return float(abs(self.lattice[b[0]] - self.lattice[a[0]]) + abs(self.lattice[b[1]] - self.lattice[a[1]]))

    def feasible_turns(self) -> tuple[bool, bool, bool]:
        return tuple(self._next_node(turn_heading(self.heading, t)) is not None for t in Turn)

    def _turn_point(self, turn: Turn) -> float:
        if turn is Turn.STRAIGHT:
            return math.inf
        return -self.offset if turn is Turn.RIGHT else self.offset

    def advance(self, distance: float, rng: np.random.Generator) -> None:
        remaining = distance
        for _ in range(10_000):
            if remaining <= 0:
                return
            if self.pending_turn is None and not self.turned:
                target = -self.entry_margin
                if self.t < target:
                    step = min(remaining, target - self.t)
                    self.t += step
                    remaining -= step
                    continue
                self.pending_turn = draw_turn(rng, self.feasible_turns())
                self.intersection_events += 1
            if self.pending_turn is not None:
                tp = self._turn_point(self.pending_turn)
                if self.t < tp and tp < math.inf:
                    step = min(remaining, tp - self.t)
                    self.t += step
                    remaining -= step
                    if self.t < tp:
                        continue
                if tp < math.inf:
                    new_heading = turn_heading(self.heading, self.pending_turn)
                    # distance from node along the new heading after snapping to the new lane
                    self.t = self.offset if self.pending_turn is Turn.RIGHT else -self.offset
                    self.heading = new_heading
                self.pending_turn = None
                self.turned = True
            exit_at = self.entry_margin
            if self.t < exit_at:
                step = min(remaining, exit_at - self.t)
                self.t += step
                remaining -= step
                if self.t < exit_at:
                    continue
            nxt = self._next_node(self.heading)
            if nxt is None:
                raise GeometryError(f"mobile at node {self.node} heading {self.heading} would leave the grid")
            gap = self._spacing(self.node, nxt)
            self.node = nxt
            self.t -= gap
            self.turned = False
        raise GeometryError("mobility step did not converge")


@dataclass
class MobileState:
    """Per-slot kinematic state for every mobile node of a scenario."""

    buses: list[Walker]
    pedestrians: list[Walker]
    bus_nodes: dict[int, tuple[int, int]]               # bus id -> (du id, mt id)
    passenger_seats: dict[int, tuple[int, tuple[float, float, float]]] = field(default_factory=dict)
    pedestrian_ids: list[int] = field(default_factory=list)


def bus_walker(layout: GridLayout, rng: np.random.Generator, speed_mps: float) -> Walker:
    """Spawn a bus uniformly over lane cells of a random street segment."""
    lattice = layout.street_centers
    n = len(lattice)
    while True:
        heading = _DIRS[rng.integers(4)]
        node = (int(rng.integers(n)), int(rng.integers(n)))
        prev = (node[0] - heading[0], node[1] - heading[1])
        if 0 <= prev[0] < n and 0 <= prev[1] < n:
            break
    lane = layout.lane_offsets[int(rng.integers(len(layout.lane_offsets)))]
    half = layout.street_width_m / 2
    gap = layout.pitch_m
    # strictly between the two intersection cells, with room for the bus body
    lo, hi = -gap + half + BUS_LENGTH_M / 2, -half - BUS_LENGTH_M / 2
    t = float(lo + rng.random() * (hi - lo))
    return Walker(lattice=lattice, node=node, heading=heading, t=t, speed_mps=speed_mps,
                  height_m=0.0, offset=lane, entry_margin=half)


def pedestrian_walker(layout: GridLayout, rng: np.random.Generator, speed_mps: float,
                      height_m: float) -> Walker:
    """Spawn a pedestrian on a random sidewalk segment (never mid-crossing)."""
    lattice = layout.walk_lines
    n = len(lattice)
    while True:
        heading = _DIRS[rng.integers(4)]
        node = (int(rng.integers(n)), int(rng.integers(n)))
        prev = (node[0] - heading[0], node[1] - heading[1])
        if not (0 <= prev[0] < n and 0 <= prev[1] < n):
            continue
        axis = 0 if heading[0] else 1
        a, b = sorted((prev[axis], node[axis]))
        # segments 0-1, 2-3, 4-5 run along a block; 1-2, 3-4 cross a street
        if a % 2 == 0:
            break
    gap = abs(lattice[node[axis]] - lattice[prev[axis]])
    t = float(-gap * (0.05 + 0.9 * rng.random()))
    return Walker(lattice=lattice, node=node, heading=heading, t=t, speed_mps=speed_mps,
                  height_m=height_m, offset=0.0, entry_margin=0.0)


def rotate_offset(offset, heading: np.ndarray) -> np.ndarray:
    """Map a bus-frame offset (x forward, y left) to world coordinates."""
    hx, hy = heading
    ox, oy, oz = offset
    return np.array([ox * hx - oy * hy, ox * hy + oy * hx, oz])


def step_mobility(layout: GridLayout, states: MobileState, dt: float, rng: np.random.Generator) -> MobileState:
    """Advance every bus and pedestrian by speed x dt; attached nodes follow implicitly."""
    for w in states.buses:
        w.advance(w.speed_mps * dt, rng)
    for w in states.pedestrians:
        w.advance(w.speed_mps * dt, rng)
    return states


def distance_3d(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(np.sum((a - b) ** 2)))


def bus_pose(w: Walker) -> tuple[np.ndarray, np.ndarray]:
    """Body-centre position (z = 0) and unit heading of a bus."""
    return w.position(), w.heading_vector()
