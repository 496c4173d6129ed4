"""Least-squares helpers shared by the comparison experiments."""

import numpy as np


def loglog_slope(x, y, window=None):
    """Fit log y ~ a log x + b by least squares and return the slope a.

    Points with nonpositive x or y are dropped; ``window=(lo, hi)``
    restricts the fit to lo <= x <= hi.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if window is not None:
        lo, hi = window
        keep &= (x >= lo) & (x <= hi)
    if keep.sum() < 2:
        raise ValueError("need at least two positive samples to fit a slope")
    slope = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0]
    return float(slope)


def refinement_order(errors):
    """Observed order from errors at successively doubled resolutions.

    Returns log2(e[i] / e[i+1]) for each adjacent pair.
    """
    e = np.asarray(errors, dtype=float)
    if e.size < 2 or np.any(e <= 0):
        raise ValueError("need at least two positive errors")
    return np.log2(e[:-1] / e[1:])
