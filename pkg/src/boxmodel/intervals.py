"""Closed-interval unions on the density axis.

Regions, events and truncation windows are all finite unions of closed
intervals [lo, hi]; this module keeps them normalized (sorted, merged,
non-empty) and provides the few geometric predicates the rest of the
package needs.
"""

import numpy as np

from .errors import DomainError


def normalize(intervals):
    """Sort and merge a list of (lo, hi) pairs; drop empty pieces."""
    cleaned = []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        if hi < lo:
            raise DomainError(f"interval with hi < lo: ({lo}, {hi})")
        cleaned.append((lo, hi))
    cleaned.sort()
    merged = []
    for lo, hi in cleaned:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def contains(values, intervals):
    """Boolean mask: which values lie in the union (closed intervals)."""
    values = np.asarray(values, dtype=float)
    mask = np.zeros(values.shape, dtype=bool)
    for lo, hi in intervals:
        mask |= (values >= lo) & (values <= hi)
    return mask


def distance(a, b):
    """Euclidean gap between two disjoint interval unions (0 if they touch)."""
    best = np.inf
    for lo1, hi1 in a:
        for lo2, hi2 in b:
            if hi1 < lo2:
                best = min(best, lo2 - hi1)
            elif hi2 < lo1:
                best = min(best, lo1 - hi2)
            else:
                return 0.0
    return float(best)


def total_width(intervals):
    return float(sum(hi - lo for lo, hi in intervals))


def complement(intervals, lo, hi):
    """Closure of the complement of the union within [lo, hi]."""
    out = []
    cursor = lo
    for a, b in normalize(intervals):
        a, b = max(a, lo), min(b, hi)
        if b < lo or a > hi:
            continue
        if a > cursor:
            out.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < hi:
        out.append((cursor, hi))
    return out
