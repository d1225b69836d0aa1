"""Pure-Python recursion kernel.

Computes per-segment arrival/departure sequences for the junction line by
availability-driven sweeps: each segment advances its own count whenever all
referenced counts of neighbouring segments are already computed.  Because
every value is a max over already-final values, the result is independent of
sweep order; sweeps merely schedule the evaluation of a DAG.

The binding census records, for every (segment, count) event, which term of
the max achieved the departure time:

    0  forward (movement + dwell) through a plain segment link
    1  backward (safety separation) through a plain segment link
    2  forward through the junction (merge into the convergence segment, or
       dispatch from the divergence into a branch head)
    3  backward through the junction (branch tail held by the convergence
       segment, or the divergence held by a branch head)

Ties go to the forward code.  This module is the reference implementation;
``_kernel_c`` is a compiled drop-in with identical semantics, selected at
import time by :mod:`.kernels`.
"""

from __future__ import annotations

STATUS_OK = 0
STATUS_DEADLOCK = 1
STATUS_NEGATIVE_INTERVAL = 3


def run_recursion(
    n: int,
    k_target: int,
    pred,      # int64[n]; -1 where the predecessor is parity-resolved
    succ,      # int64[n]; -1 where the successor is parity-resolved
    occupied,  # int8[n] initial occupancy bits
    run_nom,   # f64[n]
    run_min,   # f64[n]
    sep,       # f64[n] separation enforced when entering this segment
    is_plat,   # int8[n]
    ratio,     # f64[n] arrival/exchange ratio (0 off-platform)
    wmin,      # f64[n]
    wmax,      # f64[n]
    wnom,      # f64[n] nominal (schedule) dwell
    conv: int,
    div: int,
    tail1: int,
    tail2: int,
    head1: int,
    head2: int,
    sigma1: int,
    tau1: int,
    ready,     # f64[n] ready times of initially parked trains
    cap,       # int64[n] per-segment count budgets (>= k_target)
    dep,       # f64[n, maxcap] out
    arr,       # f64[n, maxcap] out
    ext,       # f64[n, maxcap] out: extension carried PAST this departure
    bind,      # int8[n, maxcap] out: binding census codes
    counts,    # int64[n] in/out: number of already-computed counts per segment
    blocker,   # int64[n] out: wait-for edge at a stall, -1 otherwise
) -> int:
    # counts is NOT reset here: callers may resume a partially computed
    # table with a raised k_target, provided all arrays are carried over.
    while True:
        progress = False
        done = True
        for j in range(n):
            while counts[j] < cap[j]:
                k = counts[j]
                b_j = occupied[j]

                # ---- forward term: movement into j (or initial parking) ----
                if k < b_j:
                    arrival = ready[j]
                    resid = 0.0
                else:
                    if j == conv:
                        i = k - b_j
                        par = i & 1
                        src = tail1 if par == sigma1 else tail2
                        ref = i >> 1
                    elif j == head1 or j == head2:
                        tau_u = tau1 if j == head1 else 1 - tau1
                        src = div
                        ref = 2 * (k - b_j) + tau_u
                    else:
                        src = pred[j]
                        ref = k - b_j
                    if ref >= counts[src]:
                        blocker[j] = src
                        break
                    run_eff = run_nom[j]
                    resid = 0.0
                    ext_in = ext[src][ref]
                    if ext_in > 0.0:
                        run_eff = run_nom[j] - ext_in
                        if run_eff < run_min[j]:
                            run_eff = run_min[j]
                        resid = ext_in - (run_nom[j] - run_eff)
                    arrival = dep[src][ref] + run_eff

                # ---- dwell ----
                prev_dep = dep[j][k - 1] if k >= 1 else 0.0
                if is_plat[j]:
                    interval = arrival - prev_dep
                    if interval < 0.0:
                        blocker[j] = j
                        return STATUS_NEGATIVE_INTERVAL
                    w = ratio[j] * interval
                    if w < wmin[j]:
                        w = wmin[j]
                    elif w > wmax[j]:
                        w = wmax[j]
                    ext_out = w - wnom[j]
                    if ext_out < 0.0:
                        ext_out = 0.0
                    ready_dep = arrival + w
                else:
                    ext_out = resid
                    ready_dep = arrival

                # ---- backward term: safety separation at the successor ----
                if j == div:
                    par = k & 1
                    q = head1 if par == tau1 else head2
                    ref_s = (k >> 1) + occupied[q] - 1
                elif j == tail1 or j == tail2:
                    sigma_u = sigma1 if j == tail1 else 1 - sigma1
                    q = conv
                    ref_s = 2 * k + sigma_u + occupied[q] - 1
                else:
                    q = succ[j]
                    ref_s = k + occupied[q] - 1
                if ref_s < 0:
                    safe = ready_dep  # no constraint yet
                else:
                    if ref_s >= counts[q]:
                        blocker[j] = q
                        break
                    safe = dep[q][ref_s] + sep[q]

                # ---- resolve ----
                if ready_dep >= safe:
                    d = ready_dep
                    code = 2 if (j == conv or j == head1 or j == head2) else 0
                else:
                    d = safe
                    code = 3 if (j == div or j == tail1 or j == tail2) else 1
                arr[j][k] = arrival
                dep[j][k] = d
                ext[j][k] = ext_out
                bind[j][k] = code
                counts[j] = k + 1
                blocker[j] = -1
                progress = True
            if counts[j] < k_target:
                done = False
        if done:
            return STATUS_OK
        if not progress:
            return STATUS_DEADLOCK
