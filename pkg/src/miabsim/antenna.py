"""Element patterns and ideal array factors."""

from __future__ import annotations

import numpy as np

from .scenario import ArrayType, ElementPattern

SLA_V_DB = 30.0
A_MAX_DB = 30.0
HPBW_DEG = 65.0


def element_gain_db(directions: np.ndarray, azimuth_deg: float, tilt_deg: float,
                    pattern: ElementPattern, max_gain_dbi: float) -> np.ndarray:
    """Gain toward unit ``directions`` (..., 3) for an element facing ``azimuth_deg``, tilted down."""
    directions = np.asarray(directions, dtype=float)
    if pattern is ElementPattern.OMNI:
        return np.full(directions.shape[:-1], max_gain_dbi)
    zenith = np.degrees(np.arccos(np.clip(directions[..., 2], -1.0, 1.0)))
    az = np.degrees(np.arctan2(directions[..., 1], directions[..., 0]))
    phi = (az - azimuth_deg + 180.0) % 360.0 - 180.0
    a_v = -np.minimum(12.0 * ((zenith - 90.0 - tilt_deg) / HPBW_DEG) ** 2, SLA_V_DB)
    a_h = -np.minimum(12.0 * (phi / HPBW_DEG) ** 2, A_MAX_DB)
    return max_gain_dbi - np.minimum(-(a_v + a_h), A_MAX_DB)


def element_positions(array: ArrayType, azimuth_deg: float) -> np.ndarray:
    """Element coordinates in half-wavelength units, world frame (N, 3).

    The URA panel is vertical and faces ``azimuth_deg``; the ULA lies
    horizontally along ``azimuth_deg`` (the bus axis for roof-mounted MTs).
    """
    a = np.radians(azimuth_deg)
    if array is ArrayType.URA_8X8:
        across = np.array([-np.sin(a), np.cos(a), 0.0])
        up = np.array([0.0, 0.0, 1.0])
        n_h, n_v = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
        return n_h.reshape(-1, 1) * across + n_v.reshape(-1, 1) * up
    if array is ArrayType.ULA_64:
        along = np.array([np.cos(a), np.sin(a), 0.0])
        return np.arange(64).reshape(-1, 1) * along
    return np.zeros((1, 3))


def steering(positions: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Unit-modulus response vectors (..., N) for unit ``directions`` (..., 3)."""
    return np.exp(1j * np.pi * (directions @ positions.T))


def array_factor(positions: np.ndarray, directions: np.ndarray, steer_directions: np.ndarray) -> np.ndarray:
    """Linear power gain toward each direction for a matched-filter beam at each steer direction.

    Returns a (n_steer, n_dir) matrix; the diagonal entry for a direction it is
    steered at equals the element count.
    """
    n = positions.shape[0]
    a_dir = steering(positions, directions)
    a_steer = a_dir if steer_directions is directions else steering(positions, steer_directions)
    return np.abs(a_steer.conj() @ a_dir.T) ** 2 / n


def _dirichlet_power(x: np.ndarray, n: int) -> np.ndarray:
    """|sum_k exp(j*pi*k*x)|^2 for k = 0..n-1."""
    half = 0.5 * np.pi * x
    den = np.sin(half)
    small = np.abs(den) < 1e-9
    r = np.where(small, float(n), np.sin(n * half) / np.where(small, 1.0, den))
    return r * r


def array_gain_matrix(array: ArrayType, azimuth_deg: float, directions: np.ndarray) -> np.ndarray:
    """Closed-form ``array_factor(pos, directions, directions)`` for the built-in arrays."""
    directions = np.asarray(directions, dtype=float)
    a = np.radians(azimuth_deg)
    if array is ArrayType.URA_8X8:
        across = directions @ np.array([-np.sin(a), np.cos(a), 0.0])
        up = directions[:, 2]
        return (_dirichlet_power(across[None, :] - across[:, None], 8)
                * _dirichlet_power(up[None, :] - up[:, None], 8) / 64.0)
    if array is ArrayType.ULA_64:
        along = directions @ np.array([np.cos(a), np.sin(a), 0.0])
        return _dirichlet_power(along[None, :] - along[:, None], 64) / 64.0
    return np.ones((len(directions), len(directions)))
