"""Weight-loss outcome conversions: BMI, total and excess weight loss.

All functions accept scalars or numpy arrays and broadcast elementwise.
The total-weight-loss convention here is positive-for-loss, so that
``twl_to_weight`` reconstructs visit weights as
``preop * (1 - twl / 100)`` and round-trips with ``compute_twl``.
"""

from __future__ import annotations

import numpy as np


def _ret(x, scalar: bool):
    return float(x) if scalar else x


def compute_bmi(weight_kg, height_m):
    """Body-mass index in kg/m^2.  Raises ValueError on non-positive inputs."""
    w = np.asarray(weight_kg, dtype=float)
    h = np.asarray(height_m, dtype=float)
    if np.any(w <= 0) or np.any(h <= 0):
        raise ValueError("compute_bmi requires positive weight and height")
    scalar = w.ndim == 0 and h.ndim == 0
    return _ret(w / h**2, scalar)


def compute_twl(preop_weight_kg, visit_weight_kg):
    """Percent of total weight loss at a visit; positive values mean loss."""
    w0 = np.asarray(preop_weight_kg, dtype=float)
    wt = np.asarray(visit_weight_kg, dtype=float)
    if np.any(w0 <= 0):
        raise ValueError("compute_twl requires positive preoperative weight")
    scalar = w0.ndim == 0 and wt.ndim == 0
    return _ret((w0 - wt) / w0 * 100.0, scalar)


def compute_ewl(preop_bmi, visit_bmi):
    """Percent of excess weight loss relative to the excess above BMI 25.

    100 means the patient reached BMI 25 at the visit.  The preoperative BMI
    must exceed 25 or the denominator is not positive.
    """
    b0 = np.asarray(preop_bmi, dtype=float)
    bt = np.asarray(visit_bmi, dtype=float)
    if np.any(b0 <= 25.0):
        raise ValueError("compute_ewl requires preoperative BMI > 25")
    scalar = b0.ndim == 0 and bt.ndim == 0
    return _ret((b0 - bt) / (b0 - 25.0) * 100.0, scalar)


def twl_to_weight(preop_weight_kg, twl_percent):
    """Reconstruct a visit weight from preoperative weight and TWL percent."""
    w0 = np.asarray(preop_weight_kg, dtype=float)
    twl = np.asarray(twl_percent, dtype=float)
    if np.any(w0 <= 0):
        raise ValueError("twl_to_weight requires positive preoperative weight")
    out = w0 * (1.0 - twl / 100.0)
    if np.any(out <= 0):
        raise ValueError("twl_to_weight: TWL >= 100 implies non-positive weight")
    scalar = w0.ndim == 0 and twl.ndim == 0
    return _ret(out, scalar)
