# cython: language_level=3
"""Compiled recursion kernel: drop-in twin of ``_kernel_py.run_recursion``.

The control flow and floating-point operation order mirror the pure-Python
reference statement for statement, and the build forbids FMA contraction, so
both backends produce bit-identical departure tables.  See ``_kernel_py`` for
the documentation of the recursion and the binding-census codes.
"""

STATUS_OK = 0
STATUS_DEADLOCK = 1
STATUS_NEGATIVE_INTERVAL = 3


def run_recursion(
    Py_ssize_t n,
    long long k_target,
    long long[::1] pred,
    long long[::1] succ,
    signed char[::1] occupied,
    double[::1] run_nom,
    double[::1] run_min,
    double[::1] sep,
    signed char[::1] is_plat,
    double[::1] ratio,
    double[::1] wmin,
    double[::1] wmax,
    double[::1] wnom,
    Py_ssize_t conv,
    Py_ssize_t div,
    Py_ssize_t tail1,
    Py_ssize_t tail2,
    Py_ssize_t head1,
    Py_ssize_t head2,
    int sigma1,
    int tau1,
    double[::1] ready,
    long long[::1] cap,
    double[:, ::1] dep,
    double[:, ::1] arr,
    double[:, ::1] ext,
    signed char[:, ::1] bind,
    long long[::1] counts,
    long long[::1] blocker,
):
    cdef bint progress, done
    cdef Py_ssize_t j, src, q
    cdef long long k, b_j, i, par, ref, ref_s, tau_u, sigma_u
    cdef double arrival, resid, run_eff, ext_in, prev_dep, interval
    cdef double w, ext_out, ready_dep, safe, d
    cdef int code

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
                    ext_in = ext[src, ref]
                    if ext_in > 0.0:
                        run_eff = run_nom[j] - ext_in
                        if run_eff < run_min[j]:
                            run_eff = run_min[j]
                        resid = ext_in - (run_nom[j] - run_eff)
                    arrival = dep[src, ref] + run_eff

                # ---- dwell ----
                prev_dep = dep[j, k - 1] if k >= 1 else 0.0
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
                    safe = dep[q, ref_s] + sep[q]

                # ---- resolve ----
                if ready_dep >= safe:
                    d = ready_dep
                    code = 2 if (j == conv or j == head1 or j == head2) else 0
                else:
                    d = safe
                    code = 3 if (j == div or j == tail1 or j == tail2) else 1
                arr[j, k] = arrival
                dep[j, k] = d
                ext[j, k] = ext_out
                bind[j, k] = code
                counts[j] = k + 1
                blocker[j] = -1
                progress = True
            if counts[j] < k_target:
                done = False
        if done:
            return STATUS_OK
        if not progress:
            return STATUS_DEADLOCK
