"""Vectorised adaptive Simpson quadrature over batches of intervals.

Every integral in a batch is refined independently, but all active
subintervals are evaluated in a single call of the integrand, so nested
integrals (an inner integral evaluated at every outer node) stay cheap.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

ABS_TOL = 1e-9
REL_TOL = 1e-11
ROUNDOFF_FLOOR = 1e-13
MAX_DEPTH = 40
MAX_ACTIVE = 1 << 21
INITIAL_PANELS = 8

BatchIntegrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


def integrate_batch(
    f: BatchIntegrand,
    a,
    b,
    *,
    abs_tol: float = ABS_TOL,
    rel_tol: float = REL_TOL,
    max_depth: int = MAX_DEPTH,
    panels: int = INITIAL_PANELS,
    floor: float = ROUNDOFF_FLOOR,
) -> np.ndarray:
    """Integrate ``f(x, idx)`` over ``[a[i], b[i]]`` for every ``i``.

    Parameters
    ----------
    f : callable
        ``f(x, idx)`` returns the integrand of integral ``idx[k]`` at
        ``x[k]``; both arguments are 1-d arrays of equal length.
    a, b : array_like
        Interval endpoints, broadcast to a common 1-d shape.
    abs_tol, rel_tol : float
        Each integral is refined until the local error estimates sum to at
        most ``min(abs_tol, rel_tol * |I|)``, with ``I`` a coarse first
        estimate of the integral, but never below ``floor * |I|``.
    floor : float
        Relative accuracy below which the integrand is treated as noise
        (roundoff, or the error of an inner quadrature).

    Returns
    -------
    ndarray
        One value per interval. Subintervals reaching ``max_depth`` are
        accepted as they are.

    Notes
    -----
    Each accepted panel contributes ``S2 + (S2 - S1) / 15`` (Simpson with
    one Richardson step), which is exact for quintic polynomials.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float).ravel(), np.asarray(b, dtype=float).ravel())
    m = len(a)
    out = np.zeros(m)
    if m == 0:
        return out

    # coarse composite pass: panels per integral
    idx = np.repeat(np.arange(m), panels)
    frac = np.tile(np.arange(panels), m)
    width = (b - a)[idx] / panels
    lo = a[idx] + frac * width
    hi = lo + width
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = f(lo, idx), f(mid, idx), f(hi, idx)
    whole = width / 6.0 * (flo + 4 * fmid + fhi)
    coarse = np.bincount(idx, weights=whole, minlength=m)
    tol_i = np.minimum(abs_tol, rel_tol * np.abs(coarse))
    # below this relative level Simpson differences are roundoff
    tol_i = np.maximum(tol_i, floor * np.abs(coarse))
    span = np.abs(b - a)
    tol = np.where(span[idx] > 0, tol_i[idx] / panels, np.inf)
    depth = np.zeros(len(idx), dtype=int)

    while len(idx):
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm, idx), f(rm, idx)
        half = 0.5 * (hi - lo)
        left = half / 6.0 * (flo + 4 * flm + fmid)
        right = half / 6.0 * (fmid + 4 * frm + fhi)
        err = left + right - whole
        noise = 1e-15 * (np.abs(left) + np.abs(right))
        done = (np.abs(err) <= np.maximum(15.0 * tol, noise)) | (depth >= max_depth) | ~np.isfinite(err)
        if len(idx) > MAX_ACTIVE:
            done[:] = True
        out += np.bincount(idx[done], weights=(left + right + err / 15.0)[done], minlength=m)
        keep = ~done
        if not np.any(keep):
            break
        k = keep
        idx = np.concatenate([idx[k], idx[k]])
        lo, hi, mid = (
            np.concatenate([lo[k], mid[k]]),
            np.concatenate([mid[k], hi[k]]),
            np.concatenate([lm[k], rm[k]]),
        )
        flo, fhi, fmid = (
            np.concatenate([flo[k], fmid[k]]),
            np.concatenate([fmid[k], fhi[k]]),
            np.concatenate([flm[k], frm[k]]),
        )
        whole = np.concatenate([left[k], right[k]])
        tol = np.concatenate([tol[k], tol[k]]) / 2.0
        depth = np.concatenate([depth[k], depth[k]]) + 1
    return out


def integrate(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, **kwargs) -> float:
    """Adaptive Simpson integral of a vectorised scalar function over ``[a, b]``."""
    return float(integrate_batch(lambda x, _i: f(x), [a], [b], **kwargs)[0])
