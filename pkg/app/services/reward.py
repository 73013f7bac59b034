"""
Insertion reward - progress along the insertion axis with a force-limit penalty
"""

import numpy as np

from ..lib.errors import InvalidParameterError

FORCE_PENALTY = 2.0


def reward(z, z0, depth: float, f_meas, f_upper):
    """
    r = (z - z0) / D - 1 + r_f, with r_f = -2 when any force component exceeds its limit

    Args:
        z: current insertion coordinate (scalar or array) [m]
        z0: insertion start coordinate [m]
        depth: full insertion depth D > 0 [m]
        f_meas: measured wrench, last axis of size 6
        f_upper: wrench limits, broadcastable to f_meas

    Returns:
        float for scalar inputs, otherwise an array over the leading axes
    """
    if not depth > 0.0:
        raise InvalidParameterError(f"insertion depth must be > 0, got {depth}")
    progress = (np.asarray(z, dtype=float) - np.asarray(z0, dtype=float)) / depth - 1.0
    over = np.any(np.asarray(f_meas, dtype=float) - np.asarray(f_upper, dtype=float) > 0.0, axis=-1)
    r = progress - FORCE_PENALTY * over
    return float(r) if np.ndim(r) == 0 else r
