"""CBR packet generation."""

from __future__ import annotations

import enum

import numpy as np


class Direction(enum.IntEnum):
    DL = 0
    UL = 1


class Packet:
    """One CBR packet. ``ready`` is the first slot it may be sent from its current queue."""

    __slots__ = ("id", "size", "direction", "ue", "created", "ready", "hops", "queue_free", "delivered")

    def __init__(self, pid: int, size: int, direction: Direction, ue: int, created: int):
        self.id = pid
        self.size = size
        self.direction = direction
        self.ue = ue
        self.created = created
        self.ready = created
        self.hops = 0
        self.queue_free = True
        self.delivered = None

    def __repr__(self) -> str:
        return (f"Packet(id={self.id}, {self.direction.name}, ue={self.ue}, size={self.size}, "
                f"created={self.created}, hops={self.hops})")


def draw_phases(num_ues: int, period: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, period, size=num_ues)


class TrafficSource:
    """Per-UE CBR flows in both directions, each UE on its own phase within the period."""

    def __init__(self, ue_ids: list[int], packet_bits: int, period: int, rng: np.random.Generator):
        self.ue_ids = list(ue_ids)
        self.packet_bits = packet_bits
        self.period = period
        self.phases = draw_phases(len(self.ue_ids), period, rng)
        self._by_phase = [[u for u, p in zip(self.ue_ids, self.phases) if p == k] for k in range(period)]
        self.next_id = 0
        self.generated_bits = [0, 0]

    def offered_bps(self, slot_s: float) -> float:
        return self.packet_bits / (self.period * slot_s)

    def generate(self, slot: int) -> list[Packet]:
        out = []
        for ue in self._by_phase[slot % self.period]:
            for d in (Direction.DL, Direction.UL):
                out.append(Packet(self.next_id, self.packet_bits, d, ue, slot))
                self.next_id += 1
                self.generated_bits[d] += self.packet_bits
        return out


def generate_traffic(slot: int, ues: list[int], phases, packet_bits: int, period: int = 4,
                     first_id: int = 0) -> list[Packet]:
    """Stateless variant: packets due at ``slot`` for UEs whose phase matches."""
    out = []
    pid = first_id
    for ue, ph in zip(ues, phases):
        if slot % period == ph:
            for d in (Direction.DL, Direction.UL):
                out.append(Packet(pid, packet_bits, d, ue, slot))
                pid += 1
    return out
