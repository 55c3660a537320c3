"""Compiled batch loops for long Monte Carlo streams.

Each kernel mirrors the scalar step function in its module exactly
(``cusign_step``, ``cusum_step``); tests run both on the same input and
require identical output.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def cusign_run(z, z_ref, tau, ell):
    n = z.shape[0]
    s_plus = np.empty(n, np.int64)
    s_minus = np.empty(n, np.int64)
    zeta_plus = np.empty(n, np.int8)
    zeta_minus = np.empty(n, np.int8)
    a_plus = np.empty(n, np.float64)
    a_minus = np.empty(n, np.float64)
    sp = 0
    sm = 0
    ap = 0.0
    am = 0.0
    for k in range(n):
        d = z[k] - z_ref
        sgn = 1 if d > 0 else (-1 if d < 0 else 0)
        zp = 0
        sp = max(0, sp + sgn)
        if sp >= tau:
            sp = 0
            zp = 1
        zm = 0
        sm = min(0, sm + sgn)
        if sm <= -tau:
            sm = 0
            zm = 1
        ap = ap + (zp - ap) / ell
        am = am + (zm - am) / ell
        s_plus[k] = sp
        s_minus[k] = sm
        zeta_plus[k] = zp
        zeta_minus[k] = zm
        a_plus[k] = ap
        a_minus[k] = am
    return s_plus, s_minus, zeta_plus, zeta_minus, a_plus, a_minus


@njit(cache=True)
def cusign_alarm_counts(z, z_ref, tau):
    sp = 0
    sm = 0
    n_plus = 0
    n_minus = 0
    for k in range(z.shape[0]):
        d = z[k] - z_ref
        sgn = 1 if d > 0 else (-1 if d < 0 else 0)
        sp = max(0, sp + sgn)
        if sp >= tau:
            sp = 0
            n_plus += 1
        sm = min(0, sm + sgn)
        if sm <= -tau:
            sm = 0
            n_minus += 1
    return n_plus, n_minus


@njit(cache=True)
def cusum_run(z, bias, threshold):
    n = z.shape[0]
    c_out = np.empty(n, np.float64)
    zeta = np.empty(n, np.int8)
    c = 0.0
    for k in range(n):
        if c > threshold:
            c = 0.0
            zeta[k] = 1
        else:
            c = max(0.0, c + z[k] - bias)
            if c > threshold:
                c = 0.0
                zeta[k] = 1
            else:
                zeta[k] = 0
        c_out[k] = c
    return c_out, zeta


@njit(cache=True)
def cusum_alarm_count(z, bias, threshold):
    c = 0.0
    count = 0
    for k in range(z.shape[0]):
        if c > threshold:
            c = 0.0
            count += 1
        else:
            c = max(0.0, c + z[k] - bias)
            if c > threshold:
                c = 0.0
                count += 1
    return count


@njit(cache=True)
def windowed_mean(flags, ell):
    n = flags.shape[0]
    out = np.empty(n, np.float64)
    total = 0
    for k in range(n):
        total += flags[k]
        if k >= ell:
            total -= flags[k - ell]
            out[k] = total / ell
        else:
            out[k] = total / (k + 1)
    return out
