"""Independent brute-force implementation of the twelve constraints.

Straight-line code over raw tuples, kept deliberately free of the engine's
track/counter machinery so the two can be compared frame by frame. Assumes
every operand is observed in every frame (no dropout handling).
"""

from __future__ import annotations

import math


def evaluate_stream(raw_frames, table, active_manipulable, passive_manipulable,
                    active_affs, passive_affs, affordance,
                    th_d, th_n, sigma, eps_rot, eps_col, vector_mode=False):
    """Per-frame truth of C1..C12 for one (active, hand, passive) binding.

    raw_frames: list of dicts with keys 'active_box', 'passive_box'
    (4-tuples x_min, y_min, x_max, y_max) and 'hand' (x, y).
    eps_col of None means a quarter of the passive box width.
    """
    out = []
    j5 = 0
    j6 = 0
    prev_ac = None
    prev_hand = None
    prev_ext = None
    c1 = bool(active_manipulable)
    c2 = not passive_manipulable
    c3 = affordance in active_affs
    c4 = affordance in passive_affs
    tx0, ty0, tx1, ty1 = table
    for f in raw_frames:
        ax0, ay0, ax1, ay1 = f["active_box"]
        px0, py0, px1, py1 = f["passive_box"]
        hx, hy = f["hand"]
        ac = ((ax0 + ax1) / 2.0, (ay0 + ay1) / 2.0)
        pc = ((px0 + px1) / 2.0, (py0 + py1) / 2.0)
        ext = (ax1 - ax0, ay1 - ay0)

        d = math.hypot(ac[0] - hx, ac[1] - hy)
        c5 = d < th_d
        c6 = d > th_d
        j5 = j5 + 1 if c5 else 0
        j6 = j6 + 1 if c6 else 0
        c7 = j5 >= th_n
        c8 = j6 >= th_n

        if prev_ac is None:
            c9 = False
            c10 = False
        else:
            dpx = ac[0] - prev_ac[0]
            dpy = ac[1] - prev_ac[1]
            dhx = hx - prev_hand[0]
            dhy = hy - prev_hand[1]
            mp = math.hypot(dpx, dpy)
            mh = math.hypot(dhx, dhy)
            if vector_mode:
                diff = math.hypot(dpx - dhx, dpy - dhy)
            else:
                diff = abs(mp - mh)
            c9 = diff <= sigma and mp > sigma and mh > sigma
            a_prev = math.atan2(prev_ext[1], prev_ext[0])
            a_curr = math.atan2(ext[1], ext[0])
            c10 = abs(a_curr - a_prev) > eps_rot

        c11 = tx0 < ac[0] < tx1 and ty0 < ac[1] < ty1
        eps = eps_col if eps_col is not None else 0.25 * (px1 - px0)
        c12 = abs(ac[0] - pc[0]) <= eps and ac[1] < pc[1]

        out.append({
            "C1": c1, "C2": c2, "C3": c3, "C4": c4,
            "C5": c5, "C6": c6, "C7": c7, "C8": c8,
            "C9": c9, "C10": c10, "C11": c11, "C12": c12,
        })
        prev_ac = ac
        prev_hand = (hx, hy)
        prev_ext = ext
    return out
