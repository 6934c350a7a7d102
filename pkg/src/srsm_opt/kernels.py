"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public names (:func:`mq_matrix`, :func:`greedy_maximin`,
:func:`segment_sweep`) are bound at import time according to
:data:`srsm_opt._accel.USE_NUMBA`.  Both flavours stay importable under their
suffixed names so tests and ``benchmarks/bench_kernels.py`` can compare them.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, optional_njit

# ---------------------------------------------------------------------------
# Hardy multiquadric matrix
# ---------------------------------------------------------------------------

_CHUNK_ELEMS = 1 << 22


@optional_njit()
def mq_matrix_numba(a, b, c):
    n, d = a.shape
    m = b.shape[0]
    c2 = c * c
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                s += diff * diff
            out[i, j] = math.sqrt(s + c2)
    return out


def mq_matrix_numpy(a, b, c):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, m))
    step = max(1, _CHUNK_ELEMS // max(1, m * d))
    c2 = c * c
    for lo in range(0, n, step):
        diff = a[lo:lo + step, None, :] - b[None, :, :]
        out[lo:lo + step] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff) + c2)
    return out


# ---------------------------------------------------------------------------
# Greedy maximin selection from a candidate pool
# ---------------------------------------------------------------------------


@optional_njit()
def greedy_maximin_numba(pool, fixed, n, ref):
    m, d = pool.shape
    mind = np.full(m, np.inf)
    for f in range(fixed.shape[0]):
        for i in range(m):
            s = 0.0
            for k in range(d):
                diff = pool[i, k] - fixed[f, k]
                s += diff * diff
            if s < mind[i]:
                mind[i] = s
    avail = np.ones(m, dtype=np.bool_)
    idx = np.empty(n, dtype=np.int64)
    score = np.empty(n)
    have_sites = fixed.shape[0] > 0
    for step in range(n):
        best = -1
        best_val = -1.0
        if have_sites:
            for i in range(m):
                if avail[i] and mind[i] > best_val:
                    best_val = mind[i]
                    best = i
        else:
            for i in range(m):
                if avail[i]:
                    s = 0.0
                    for k in range(d):
                        diff = pool[i, k] - ref[k]
                        s += diff * diff
                    if s > best_val:
                        best_val = s
                        best = i
            best_val = np.inf
        idx[step] = best
        score[step] = math.sqrt(best_val)
        avail[best] = False
        have_sites = True
        for i in range(m):
            s = 0.0
            for k in range(d):
                diff = pool[i, k] - pool[best, k]
                s += diff * diff
            if s < mind[i]:
                mind[i] = s
    return idx, score


def greedy_maximin_numpy(pool, fixed, n, ref):
    pool = np.asarray(pool, dtype=float)
    fixed = np.asarray(fixed, dtype=float).reshape(-1, pool.shape[1])
    m = pool.shape[0]
    mind = np.full(m, np.inf)
    for f in fixed:
        diff = pool - f
        mind = np.minimum(mind, np.einsum("ij,ij->i", diff, diff))
    avail = np.ones(m, dtype=bool)
    idx = np.empty(n, dtype=np.int64)
    score = np.empty(n)
    have_sites = fixed.shape[0] > 0
    for step in range(n):
        if have_sites:
            cand = np.where(avail, mind, -1.0)
            best = int(np.argmax(cand))
            score[step] = math.sqrt(cand[best])
        else:
            diff = pool - ref
            cand = np.where(avail, np.einsum("ij,ij->i", diff, diff), -1.0)
            best = int(np.argmax(cand))
            score[step] = np.inf
        idx[step] = best
        avail[best] = False
        have_sites = True
        diff = pool - pool[best]
        mind = np.minimum(mind, np.einsum("ij,ij->i", diff, diff))
    return idx, score


# ---------------------------------------------------------------------------
# Quasi-static single-DOF spinal segment equilibrium
# ---------------------------------------------------------------------------
#
# lig:   (3, 5) rows of (lever arm mm, translation coupling mm/mm, rest length mm,
#        slack strain, stiffness N/strain)
# facet: (lever arm mm, stiffness N/deg, engagement angle deg)
# joint: kind 0 (intact): (k1 N.m/deg, k3 N.m/deg^3, kappa mm/deg, ...)
#        kind 1 (tdr):    (preload N, R_eff mm, x_c mm, L_ant mm, L_post mm,
#                          k_wall_ant N/mm, k_wall_post N/mm, k_art N.m/deg, ...)
# sgn:   +1 when the motion direction is flexion-positive, -1 for extension
# couples: 1 when the motion couples anteroposterior translation

BRACKET_DEG = 60.0
BISECT_ITERS = 100


@optional_njit()
def _resist_scalar(phi, lig, facet, joint, kind, sgn, couples):
    rad = phi * math.pi / 180.0
    wall = 0.0
    tau = 0.0
    if kind == 0:
        mom = joint[0] * phi + joint[1] * phi * phi * phi
        tau = joint[2] * phi
    else:
        preload = joint[0]
        r_eff = joint[1]
        mom = preload * r_eff * math.sin(rad) / 1000.0 + joint[7] * phi
        if couples == 1:
            th = sgn * rad
            tn = joint[2] * (1.0 - math.cos(th)) + r_eff * math.sin(th)
            ea = max(0.0, tn - joint[3])
            ep = max(0.0, -joint[4] - tn)
            t = min(max(tn, -joint[4]), joint[3])
            tau = sgn * t
            mom += sgn * (joint[5] * ea - joint[6] * ep) * r_eff / 1000.0
            wall = joint[5] * ea + joint[6] * ep
    for j in range(lig.shape[0]):
        eps = (lig[j, 0] * rad + lig[j, 1] * tau) / lig[j, 2] - lig[j, 3]
        if eps > 0.0:
            mom += lig[j, 0] * lig[j, 4] * eps / 1000.0
    engage = phi - facet[2]
    if engage > 0.0:
        mom += facet[0] * facet[1] * engage / 1000.0
    return mom, tau, wall


@optional_njit()
def segment_sweep_numba(moment, bias, lig, facet, joint, kind, sgn, couples):
    n = moment.shape[0]
    nl = lig.shape[0]
    phi_out = np.empty(n)
    tau_out = np.empty(n)
    wall_out = np.empty(n)
    res_out = np.empty(n)
    strain = np.empty((nl, n))
    fforce = np.empty(n)
    ok = True
    for s in range(n):
        target = moment[s] + bias
        lo = -BRACKET_DEG
        hi = BRACKET_DEG
        flo = _resist_scalar(lo, lig, facet, joint, kind, sgn, couples)[0] - target
        fhi = _resist_scalar(hi, lig, facet, joint, kind, sgn, couples)[0] - target
        if flo > 0.0 or fhi < 0.0:
            ok = False
            phi_out[s] = np.nan
            tau_out[s] = np.nan
            wall_out[s] = np.nan
            res_out[s] = np.nan
            fforce[s] = np.nan
            for j in range(nl):
                strain[j, s] = np.nan
            continue
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            fm = _resist_scalar(mid, lig, facet, joint, kind, sgn, couples)[0] - target
            if fm == 0.0:
                lo = mid
                hi = mid
                break
            if fm < 0.0:
                lo = mid
            else:
                hi = mid
        phi = 0.5 * (lo + hi)
        mom, tau, wall = _resist_scalar(phi, lig, facet, joint, kind, sgn, couples)
        phi_out[s] = phi
        tau_out[s] = tau
        wall_out[s] = wall
        res_out[s] = mom - target
        rad = phi * math.pi / 180.0
        for j in range(nl):
            eps = (lig[j, 0] * rad + lig[j, 1] * tau) / lig[j, 2] - lig[j, 3]
            strain[j, s] = max(0.0, eps)
        fforce[s] = facet[1] * max(0.0, phi - facet[2])
    return ok, phi_out, tau_out, strain, fforce, wall_out, res_out


def _resist_numpy(phi, lig, facet, joint, kind, sgn, couples):
    rad = phi * np.pi / 180.0
    wall = np.zeros_like(phi)
    if kind == 0:
        mom = joint[0] * phi + joint[1] * phi ** 3
        tau = joint[2] * phi
    else:
        preload, r_eff = joint[0], joint[1]
        mom = preload * r_eff * np.sin(rad) / 1000.0 + joint[7] * phi
        if couples == 1:
            th = sgn * rad
            tn = joint[2] * (1.0 - np.cos(th)) + r_eff * np.sin(th)
            ea = np.maximum(0.0, tn - joint[3])
            ep = np.maximum(0.0, -joint[4] - tn)
            t = np.minimum(np.maximum(tn, -joint[4]), joint[3])
            tau = sgn * t
            mom = mom + sgn * (joint[5] * ea - joint[6] * ep) * r_eff / 1000.0
            wall = joint[5] * ea + joint[6] * ep
        else:
            tau = np.zeros_like(phi)
    for j in range(lig.shape[0]):
        eps = (lig[j, 0] * rad + lig[j, 1] * tau) / lig[j, 2] - lig[j, 3]
        mom = mom + lig[j, 0] * lig[j, 4] * np.maximum(eps, 0.0) / 1000.0
    mom = mom + facet[0] * facet[1] * np.maximum(phi - facet[2], 0.0) / 1000.0
    return mom, tau, wall


def segment_sweep_numpy(moment, bias, lig, facet, joint, kind, sgn, couples):
    moment = np.asarray(moment, dtype=float)
    lig = np.asarray(lig, dtype=float)
    facet = np.asarray(facet, dtype=float)
    joint = np.asarray(joint, dtype=float)
    n = moment.shape[0]
    nl = lig.shape[0]
    target = moment + bias
    lo = np.full(n, -BRACKET_DEG)
    hi = np.full(n, BRACKET_DEG)
    flo = _resist_numpy(lo, lig, facet, joint, kind, sgn, couples)[0] - target
    fhi = _resist_numpy(hi, lig, facet, joint, kind, sgn, couples)[0] - target
    bracketed = (flo <= 0.0) & (fhi >= 0.0)
    done = ~bracketed
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        fm = _resist_numpy(mid, lig, facet, joint, kind, sgn, couples)[0] - target
        active = ~done
        exact = active & (fm == 0.0)
        lo = np.where(exact | (active & (fm < 0.0)), mid, lo)
        hi = np.where(exact | (active & (fm > 0.0)), mid, hi)
        done = done | exact
    phi = 0.5 * (lo + hi)
    mom, tau, wall = _resist_numpy(phi, lig, facet, joint, kind, sgn, couples)
    rad = phi * np.pi / 180.0
    strain = np.empty((nl, n))
    for j in range(nl):
        eps = (lig[j, 0] * rad + lig[j, 1] * tau) / lig[j, 2] - lig[j, 3]
        strain[j] = np.maximum(eps, 0.0)
    fforce = facet[1] * np.maximum(phi - facet[2], 0.0)
    res = mom - target
    bad = ~bracketed
    for arr in (phi, tau, wall, res, fforce):
        arr[bad] = np.nan
    strain[:, bad] = np.nan
    return bool(bracketed.all()), phi, tau, strain, fforce, wall, res


if USE_NUMBA:
    mq_matrix = mq_matrix_numba
    greedy_maximin = greedy_maximin_numba
    segment_sweep = segment_sweep_numba
else:
    mq_matrix = mq_matrix_numpy
    greedy_maximin = greedy_maximin_numpy
    segment_sweep = segment_sweep_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
