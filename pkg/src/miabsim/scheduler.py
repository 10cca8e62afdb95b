"""Bearer queues and the longest-waiting-first round-robin RB scheduler."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

from .traffic import Direction, Packet

ACCESS = 0
BACKHAUL = 1


class BearerQueue:
    """FIFO of packets for one (cell, served node, direction).

    ``credit`` counts bits of the head packet already delivered over the air.
    """

    __slots__ = ("id", "cell", "node", "direction", "kind", "packets", "credit", "queued_bits")

    def __init__(self, bid: int, cell: int, node: int, direction: Direction, kind: int = ACCESS):
        self.id = bid
        self.cell = cell
        self.node = node
        self.direction = direction
        self.kind = kind
        self.packets: deque[Packet] = deque()
        self.credit = 0
        self.queued_bits = 0

    def __len__(self) -> int:
        return len(self.packets)

    @property
    def key(self) -> tuple:
        return (self.cell, self.node, self.direction)

    def push(self, p: Packet) -> None:
        self.packets.append(p)
        self.queued_bits += p.size

    def backlog_bits(self) -> int:
        return self.queued_bits - self.credit

    def has_ready(self, slot: int) -> bool:
        return bool(self.packets) and self.packets[0].ready <= slot

    def hol_wait(self, slot: int) -> int:
        return slot - self.packets[0].ready

    def deliver(self, bits: int, slot: int) -> list[Packet]:
        """Apply successfully sent bits to the FIFO; returns packets now complete."""
        done = []
        credit = self.credit + bits
        q = self.packets
        while q and q[0].ready <= slot and credit >= q[0].size:
            p = q.popleft()
            credit -= p.size
            self.queued_bits -= p.size
            done.append(p)
        self.credit = credit if (q and q[0].ready <= slot) else 0
        return done

    def extract(self, pred) -> list[Packet]:
        """Remove packets matching ``pred`` (order kept). A partially sent head restarts."""
        keep, out = deque(), []
        for p in self.packets:
            (out if pred(p) else keep).append(p)
        if out and self.packets and pred(self.packets[0]):
            self.credit = 0
        self.packets = keep
        self.queued_bits = sum(p.size for p in keep)
        if not keep:
            self.credit = 0
        return out


@dataclass
class Grant:
    bearer: BearerQueue
    bits_per_rb: int
    blocks: list = field(default_factory=list)  # (first rb, count)

    @property
    def num_rbs(self) -> int:
        return sum(n for _, n in self.blocks)

    def rb_indices(self) -> list[int]:
        out = []
        for a, n in self.blocks:
            out.extend(range(a, a + n))
        return out


@dataclass(frozen=True)
class AssignmentRecord:
    slot: int
    cell: int
    bearer: int
    wait: int
    competing_wait: int | None
    first_rb: int
    num_rbs: int


def schedule_rbs(slot: int, bearers: list[BearerQueue], num_rbs: int, bits_per_rb: dict[int, int],
                 log: list | None = None) -> list[Grant]:
    """Assign RBs one block at a time to the backlogged bearer with the longest head-of-line wait.

    A bearer keeps the RBs until its head packet is covered (its wait cannot
    change sooner), then competes again with the wait of its next ready packet.
    Ties go to the lower bearer id. Only packets already ready count as backlog.
    """
    heap = []
    state = {}
    for b in bearers:
        bpr = bits_per_rb.get(b.id, 0)
        if bpr <= 0 or not b.has_ready(slot):
            continue
        state[b.id] = [b, bpr, 0, b.packets[0].size - b.credit]  # bearer, bpr, head idx, head remaining
        heapq.heappush(heap, (-(slot - b.packets[0].ready), b.id))
    grants: dict[int, Grant] = {}
    order = []
    free = 0
    while heap and free < num_rbs:
        negw, bid = heapq.heappop(heap)
        st = state[bid]
        b, bpr, idx, rem = st
        n = min(math.ceil(rem / bpr), num_rbs - free)
        if log is not None:
            log.append(AssignmentRecord(slot, b.cell, bid, -negw, -heap[0][0] if heap else None, free, n))
        g = grants.get(bid)
        if g is None:
            g = grants[bid] = Grant(b, bpr)
            order.append(bid)
        g.blocks.append((free, n))
        free += n
        bits = n * bpr
        if bits < rem:
            st[3] = rem - bits
            continue
        carry = bits - rem
        idx += 1
        q = b.packets
        while idx < len(q) and q[idx].ready <= slot and q[idx].size <= carry:
            carry -= q[idx].size
            idx += 1
        if idx < len(q) and q[idx].ready <= slot:
            st[2], st[3] = idx, q[idx].size - carry
            heapq.heappush(heap, (-(slot - q[idx].ready), bid))
    return [grants[i] for i in order]
