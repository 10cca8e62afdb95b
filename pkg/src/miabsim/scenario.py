"""Node inventory and initial placement for the three deployments."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig, ScenarioKind, ValidationError
from .geometry import (
    GridLayout, MobileState, Walker, bus_walker, pedestrian_walker, seat_offsets,
)


class NodeKind(enum.IntEnum):
    IAB_DONOR = 0
    PICO_GNB = 1
    MIAB_DU = 2
    MIAB_MT = 3
    PEDESTRIAN = 4
    PASSENGER = 5


class ArrayType(str, enum.Enum):
    URA_8X8 = "ura8x8"
    ULA_64 = "ula64"
    SINGLE = "single"


class ElementPattern(str, enum.Enum):
    THREE_GPP_3D = "3gpp3d"
    OMNI = "omni"


@dataclass(frozen=True)
class EntityRow:
    height_m: float
    tx_power_dbm: float
    tilt_deg: float
    array: ArrayType
    element_pattern: ElementPattern
    max_element_gain_dbi: float
    speed_kmh: float


ENTITY_TABLE: dict[NodeKind, EntityRow] = {
    NodeKind.IAB_DONOR: EntityRow(25.0, 35.0, 12.0, ArrayType.URA_8X8, ElementPattern.THREE_GPP_3D, 8.0, 0.0),
    NodeKind.MIAB_DU: EntityRow(2.5, 24.0, 4.0, ArrayType.URA_8X8, ElementPattern.THREE_GPP_3D, 8.0, 40.0),
    NodeKind.MIAB_MT: EntityRow(3.5, 24.0, 0.0, ArrayType.ULA_64, ElementPattern.OMNI, 0.0, 40.0),
    NodeKind.PEDESTRIAN: EntityRow(1.5, 24.0, 0.0, ArrayType.SINGLE, ElementPattern.OMNI, 0.0, 3.0),
    NodeKind.PASSENGER: EntityRow(1.8, 24.0, 0.0, ArrayType.SINGLE, ElementPattern.OMNI, 0.0, 40.0),
    # not in the published entity table: street-level small cell sharing the DU radio
    NodeKind.PICO_GNB: EntityRow(10.0, 24.0, 10.0, ArrayType.URA_8X8, ElementPattern.THREE_GPP_3D, 8.0, 0.0),
}

CELL_KINDS = (NodeKind.IAB_DONOR, NodeKind.PICO_GNB, NodeKind.MIAB_DU)
UE_KINDS = (NodeKind.PEDESTRIAN, NodeKind.PASSENGER)


@dataclass(frozen=True)
class NodeDescriptor:
    id: int
    kind: NodeKind
    height_m: float
    tx_power_dbm: float
    tilt_deg: float
    array: ArrayType
    element_pattern: ElementPattern
    max_element_gain_dbi: float
    speed_kmh: float
    bus_id: int | None = None
    azimuth_deg: float | None = None
    iab_support: bool = False

    @property
    def is_cell(self) -> bool:
        return self.kind in CELL_KINDS

    @property
    def is_ue(self) -> bool:
        return self.kind in UE_KINDS

    @property
    def num_elements(self) -> int:
        return {ArrayType.URA_8X8: 64, ArrayType.ULA_64: 64, ArrayType.SINGLE: 1}[self.array]

    def table_fields(self) -> tuple:
        return (self.height_m, self.tx_power_dbm, self.tilt_deg, self.array,
                self.element_pattern, self.max_element_gain_dbi, self.speed_kmh)


def make_node(node_id: int, kind: NodeKind, **extra) -> NodeDescriptor:
    row = ENTITY_TABLE[kind]
    return NodeDescriptor(node_id, kind, row.height_m, row.tx_power_dbm, row.tilt_deg, row.array,
                          row.element_pattern, row.max_element_gain_dbi, row.speed_kmh, **extra)


@dataclass
class Scenario:
    config: ScenarioConfig
    layout: GridLayout
    nodes: tuple[NodeDescriptor, ...]
    fixed_positions: dict[int, tuple[float, float, float]]
    mobile: MobileState

    def ids_of(self, *kinds: NodeKind) -> list[int]:
        return [n.id for n in self.nodes if n.kind in kinds]

    def fingerprint(self) -> tuple:
        """Hashable snapshot of everything the scenario draws at random."""
        buses = tuple((w.node, w.heading, round(w.t, 12), w.offset) for w in self.mobile.buses)
        peds = tuple((w.node, w.heading, round(w.t, 12)) for w in self.mobile.pedestrians)
        seats = tuple(sorted(self.mobile.passenger_seats.items()))
        return (self.nodes, tuple(sorted(self.fixed_positions.items())), buses, peds, seats)


def donor_sites(layout: GridLayout) -> list[tuple[float, float, float]]:
    """Three sites on the central block perimeter at 120 deg spacing, antennas facing outward.

    Returns (x, y, azimuth_deg) per donor.
    """
    x0, y0, x1, y1 = layout.block_interior(1, 1)
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    half = (x1 - x0) / 2
    sites = []
    for az in (90.0, 210.0, 330.0):
        ux, uy = math.cos(math.radians(az)), math.sin(math.radians(az))
        # ray from the block centre to the square boundary
        s = half / max(abs(ux), abs(uy))
        sites.append((cx + s * ux, cy + s * uy, az))
    return sites


def pico_sites(layout: GridLayout, radius_m: float) -> list[tuple[float, float, float]]:
    cx, cy = layout.center
    sites = []
    for k in range(6):
        a = math.radians(60.0 * k)
        x, y = cx + radius_m * math.cos(a), cy + radius_m * math.sin(a)
        sites.append((x, y, (math.degrees(a) + 180.0) % 360.0))
    return sites


def build_scenario(cfg: ScenarioConfig, rng: np.random.Generator, layout: GridLayout | None = None) -> Scenario:
    layout = layout or GridLayout()
    nodes: list[NodeDescriptor] = []
    fixed: dict[int, tuple[float, float, float]] = {}

    for x, y, az in donor_sites(layout):
        nid = len(nodes)
        nodes.append(make_node(nid, NodeKind.IAB_DONOR, azimuth_deg=az,
                               iab_support=cfg.scenario_kind is ScenarioKind.MIAB))
        fixed[nid] = (x, y, ENTITY_TABLE[NodeKind.IAB_DONOR].height_m)

    if cfg.scenario_kind is ScenarioKind.MACROS_PICOS:
        for x, y, az in pico_sites(layout, cfg.pico_ring_radius_m):
            if not layout.in_bounds(x, y):
                raise ValidationError("pico_ring_radius_m", "pico site falls outside the grid")
            nid = len(nodes)
            nodes.append(make_node(nid, NodeKind.PICO_GNB, azimuth_deg=az))
            fixed[nid] = (x, y, ENTITY_TABLE[NodeKind.PICO_GNB].height_m)

    bus_speed = ENTITY_TABLE[NodeKind.MIAB_DU].speed_kmh / 3.6
    ped_row = ENTITY_TABLE[NodeKind.PEDESTRIAN]
    buses = [bus_walker(layout, rng, bus_speed) for _ in range(cfg.num_buses)]

    bus_nodes: dict[int, tuple[int, int]] = {}
    if cfg.scenario_kind is ScenarioKind.MIAB:
        for b in range(cfg.num_buses):
            du = len(nodes)
            nodes.append(make_node(du, NodeKind.MIAB_DU, bus_id=b))
            mt = len(nodes)
            nodes.append(make_node(mt, NodeKind.MIAB_MT, bus_id=b))
            bus_nodes[b] = (du, mt)

    pedestrians: list[Walker] = []
    ped_ids: list[int] = []
    for _ in range(cfg.num_pedestrians):
        nid = len(nodes)
        nodes.append(make_node(nid, NodeKind.PEDESTRIAN))
        pedestrians.append(pedestrian_walker(layout, rng, ped_row.speed_kmh / 3.6, ped_row.height_m))
        ped_ids.append(nid)

    seats = seat_offsets(ENTITY_TABLE[NodeKind.PASSENGER].height_m)
    passenger_seats: dict[int, tuple[int, tuple[float, float, float]]] = {}
    for b in range(cfg.num_buses):
        chosen = rng.choice(len(seats), size=cfg.passengers_per_bus, replace=False)
        for s in sorted(int(c) for c in chosen):
            nid = len(nodes)
            nodes.append(make_node(nid, NodeKind.PASSENGER, bus_id=b))
            passenger_seats[nid] = (b, seats[s])

    n_ues = sum(1 for n in nodes if n.is_ue)
    if n_ues != cfg.total_ues or len(passenger_seats) != cfg.num_passengers:
        raise ValidationError("total_ues", "generated UE count disagrees with the configuration")

    mobile = MobileState(buses=buses, pedestrians=pedestrians, bus_nodes=bus_nodes,
                         passenger_seats=passenger_seats, pedestrian_ids=ped_ids)
    return Scenario(config=cfg, layout=layout, nodes=tuple(nodes), fixed_positions=fixed, mobile=mobile)
