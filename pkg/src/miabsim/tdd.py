"""10-slot TDD frames per node class and the DU resource attributes they imply.

Slot indices are 0-based; slot 0 is the first slot of a frame.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

FRAME_SLOTS = 10


class ConstraintViolation(RuntimeError):
    """A grant broke a half-duplex or slot-role rule."""


class Role(enum.IntEnum):
    SILENT = 0
    DL = 1
    UL = 2


class ResourceAttr(enum.Enum):
    HARD = "hard"
    UNAVAILABLE = "unavailable"


_CELL = {"DL": Role.DL, "S": Role.DL, "UL": Role.UL, "-": Role.SILENT}


@dataclass(frozen=True)
class TddPattern:
    name: str
    cells: tuple[str, ...]

    def __post_init__(self):
        if len(self.cells) != FRAME_SLOTS or any(c not in _CELL for c in self.cells):
            raise ValueError(f"bad TDD row {self.cells}")

    @property
    def roles(self) -> tuple[Role, ...]:
        return tuple(_CELL[c] for c in self.cells)

    def role(self, slot: int) -> Role:
        return _CELL[self.cells[slot % FRAME_SLOTS]]

    def fractions(self) -> tuple[float, float, float]:
        r = self.roles
        dl = sum(x is Role.DL for x in r) / FRAME_SLOTS
        ul = sum(x is Role.UL for x in r) / FRAME_SLOTS
        return dl, ul, dl + ul

    def slots_with(self, role: Role) -> tuple[int, ...]:
        return tuple(i for i, x in enumerate(self.roles) if x is role)

    def next_slot(self, role: Role, slot: int) -> int:
        """First absolute slot >= ``slot`` with the given role."""
        for k in range(FRAME_SLOTS):
            if self.role(slot + k) is role:
                return slot + k
        raise ValueError(f"{self.name} never has role {role.name}")


MACRO_PICO = TddPattern("macro_pico", ("DL", "S", "UL", "UL", "UL", "DL", "S", "UL", "UL", "DL"))
IAB_DONOR = TddPattern("iab_donor", ("DL", "UL", "-", "DL", "-", "UL", "DL", "-", "UL", "DL"))
IAB_BACKHAUL = TddPattern("iab_backhaul", ("DL", "-", "UL", "DL", "UL", "-", "-", "UL", "-", "DL"))
IAB_NODE = TddPattern("iab_node", ("-", "UL", "DL", "-", "DL", "UL", "DL", "DL", "UL", "-"))

PATTERNS = {p.name: p for p in (MACRO_PICO, IAB_DONOR, IAB_BACKHAUL, IAB_NODE)}


def slot_role(pattern: TddPattern, slot_index: int) -> Role:
    return pattern.role(slot_index)


def du_resource_attrs(pattern: TddPattern = IAB_NODE) -> tuple[ResourceAttr, ...]:
    return tuple(ResourceAttr.UNAVAILABLE if r is Role.SILENT else ResourceAttr.HARD for r in pattern.roles)


def hd_conflicts(mt: TddPattern, du: TddPattern) -> list[int]:
    """Frame slots where one part of a relay transmits while the other receives."""
    bad = []
    for s in range(FRAME_SLOTS):
        mt_rx, mt_tx = mt.role(s) is Role.DL, mt.role(s) is Role.UL
        du_tx, du_rx = du.role(s) is Role.DL, du.role(s) is Role.UL
        if (mt_rx and du_tx) or (mt_tx and du_rx):
            bad.append(s)
    return bad


def usage_counts(pattern: TddPattern, num_slots: int) -> tuple[int, int, int]:
    """(DL, UL, silent) slot counts over the first ``num_slots`` slots."""
    dl = ul = si = 0
    for s in range(num_slots):
        r = pattern.role(s)
        if r is Role.DL:
            dl += 1
        elif r is Role.UL:
            ul += 1
        else:
            si += 1
    return dl, ul, si
