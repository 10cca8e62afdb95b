"""Independent reference implementations used as test oracles.

Written separately from the package code, scalar and loop-based on purpose.
"""

from __future__ import annotations

import math

import numpy as np

C = 299_792_458.0

# Frame tables in their published 1-based slot numbering.
MACRO_PICO_1 = {1: "DL", 2: "DL", 3: "UL", 4: "UL", 5: "UL", 6: "DL", 7: "DL", 8: "UL", 9: "UL", 10: "DL"}
IAB_DONOR_1 = {1: "DL", 2: "UL", 3: "-", 4: "DL", 5: "-", 6: "UL", 7: "DL", 8: "-", 9: "UL", 10: "DL"}
IAB_BACKHAUL_1 = {1: "DL", 2: "-", 3: "UL", 4: "DL", 5: "UL", 6: "-", 7: "-", 8: "UL", 9: "-", 10: "DL"}
IAB_NODE_1 = {1: "-", 2: "UL", 3: "DL", 4: "-", 5: "DL", 6: "UL", 7: "DL", 8: "DL", 9: "UL", 10: "-"}


def pathloss_ref(kind: str, los: bool, d3d: float, fc_hz: float, h_bs: float, h_ut: float) -> float:
    """Scalar 3GPP TR 38.901 Table 7.4.1-1 pathloss (UMa, UMi street canyon, InH office)."""
    fc = fc_hz / 1e9
    dz = h_bs - h_ut
    d2d = math.sqrt(max(d3d * d3d - dz * dz, 0.0))
    if kind == "inh":
        pl_los = 32.4 + 17.3 * math.log10(d3d) + 20 * math.log10(fc)
        if los:
            return pl_los
        return max(pl_los, 17.3 + 38.3 * math.log10(d3d) + 24.9 * math.log10(fc))
    hb, hu = h_bs - 1.0, h_ut - 1.0
    dbp = 4 * hb * hu * fc_hz / C
    if kind == "uma":
        if d2d <= dbp:
            pl_los = 28.0 + 22 * math.log10(d3d) + 20 * math.log10(fc)
        else:
            pl_los = 28.0 + 40 * math.log10(d3d) + 20 * math.log10(fc) - 9 * math.log10(dbp ** 2 + dz ** 2)
        if los:
            return pl_los
        nlos = 13.54 + 39.08 * math.log10(d3d) + 20 * math.log10(fc) - 0.6 * (h_ut - 1.5)
        return max(pl_los, nlos)
    if kind == "umi":
        if d2d <= dbp:
            pl_los = 32.4 + 21 * math.log10(d3d) + 20 * math.log10(fc)
        else:
            pl_los = 32.4 + 40 * math.log10(d3d) + 20 * math.log10(fc) - 9.5 * math.log10(dbp ** 2 + dz ** 2)
        if los:
            return pl_los
        nlos = 22.4 + 35.3 * math.log10(d3d) + 21.3 * math.log10(fc) - 0.3 * (h_ut - 1.5)
        return max(pl_los, nlos)
    raise ValueError(kind)


def waterfilling_capacity(H: np.ndarray, p_total: float, noise: float) -> float:
    """Shannon capacity (bit/s/Hz) of H with optimal power over its eigenmodes."""
    lam = np.sort(np.linalg.eigvalsh(H.conj().T @ H))[::-1]
    g = lam[lam > 1e-15 * max(lam[0], 1e-300)] / noise
    for k in range(len(g), 0, -1):
        mu = (p_total + np.sum(1.0 / g[:k])) / k
        p = mu - 1.0 / g[:k]
        if np.all(p > 0):
            return float(np.sum(np.log2(1.0 + p * g[:k])))
    return 0.0


def rr_per_rb(slot: int, bearers, num_rbs: int, bits_per_rb: dict[int, int]) -> dict[int, int]:
    """RB counts from the one-RB-at-a-time longest-wait rule.

    ``bearers`` are (id, [(size, ready), ...], credit) tuples.
    """
    granted = {bid: 0 for bid, _, _ in bearers}
    state = {bid: (pk, credit) for bid, pk, credit in bearers}

    def head_wait(bid):
        pk, credit = state[bid]
        bits = granted[bid] * bits_per_rb[bid] + credit
        for size, ready in pk:
            if ready > slot:
                return None
            if bits >= size:
                bits -= size
                continue
            return slot - ready
        return None

    for _ in range(num_rbs):
        best = None
        for bid in sorted(state):
            if bits_per_rb.get(bid, 0) <= 0:
                continue
            w = head_wait(bid)
            if w is None:
                continue
            if best is None or w > best[0]:
                best = (w, bid)
        if best is None:
            break
        granted[best[1]] += 1
    return {k: v for k, v in granted.items() if v}
