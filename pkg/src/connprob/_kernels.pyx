# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: coefficient recursion, compensated series scan and
MPFR extended-precision evaluation. Mirrors ``_fallback.py``."""
from libc.math cimport exp, log, lgamma, fabs, sqrt, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

cdef extern from "mpfr.h":
    ctypedef struct __mpfr_struct:
        pass
    ctypedef long mpfr_prec_t
    ctypedef enum mpfr_rnd_t:
        MPFR_RNDN
    void mpfr_init2(__mpfr_struct*, mpfr_prec_t)
    void mpfr_clear(__mpfr_struct*)
    int mpfr_set_d(__mpfr_struct*, double, mpfr_rnd_t)
    int mpfr_set_ui(__mpfr_struct*, unsigned long, mpfr_rnd_t)
    int mpfr_set(__mpfr_struct*, __mpfr_struct*, mpfr_rnd_t)
    int mpfr_add(__mpfr_struct*, __mpfr_struct*, __mpfr_struct*, mpfr_rnd_t)
    int mpfr_sub(__mpfr_struct*, __mpfr_struct*, __mpfr_struct*, mpfr_rnd_t)
    int mpfr_mul(__mpfr_struct*, __mpfr_struct*, __mpfr_struct*, mpfr_rnd_t)
    int mpfr_mul_ui(__mpfr_struct*, __mpfr_struct*, unsigned long, mpfr_rnd_t)
    int mpfr_mul_si(__mpfr_struct*, __mpfr_struct*, long, mpfr_rnd_t)
    int mpfr_div_ui(__mpfr_struct*, __mpfr_struct*, unsigned long, mpfr_rnd_t)
    int mpfr_ui_sub(__mpfr_struct*, unsigned long, __mpfr_struct*, mpfr_rnd_t)
    int mpfr_neg(__mpfr_struct*, __mpfr_struct*, mpfr_rnd_t)
    int mpfr_exp(__mpfr_struct*, __mpfr_struct*, mpfr_rnd_t)
    int mpfr_sqrt(__mpfr_struct*, __mpfr_struct*, mpfr_rnd_t)
    int mpfr_fma(__mpfr_struct*, __mpfr_struct*, __mpfr_struct*, __mpfr_struct*, mpfr_rnd_t)
    double mpfr_get_d(__mpfr_struct*, mpfr_rnd_t)
    void mpfr_set_emin(long)
    void mpfr_set_emax(long)
    long mpfr_get_emin_min()
    long mpfr_get_emax_max()

mpfr_set_emin(mpfr_get_emin_min())
mpfr_set_emax(mpfr_get_emax_max())

cdef double _RESCALE = 1e150


def coeff_series(double lam1, double lam2, double b1sq, double b2sq, int W):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d = np.zeros(W)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.empty(W + 1)
    cdef double a1 = 1.0 / (2.0 * lam1), a2 = 1.0 / (2.0 * lam2)
    cdef double p1 = 1.0, p2 = 1.0, acc
    cdef int k, r
    for k in range(1, W + 1):
        p1 *= a1
        p2 *= a2
        d[k - 1] = 0.5 * ((1.0 - k * b1sq) * p1 + (1.0 - k * b2sq) * p2)
    c[0] = exp(-0.5 * (b1sq + b2sq)) / sqrt(4.0 * lam1 * lam2)
    for k in range(1, W + 1):
        acc = 0.0
        for r in range(k):
            acc += d[k - r - 1] * c[r]
        c[k] = acc / k
    return d, c


cdef inline void _poly_coeffs(double a1, double a2, double B1, double B2,
                              double* U, double* P) noexcept:
    cdef double e1 = a1 + a2, e2 = a1 * a2, g1 = 1.0 - B1, g2 = 1.0 - B2
    U[0] = 1.0
    U[1] = -2.0 * e1
    U[2] = e1 * e1 + 2.0 * e2
    U[3] = -2.0 * e1 * e2
    U[4] = e2 * e2
    P[0] = 0.5 * (a1 * g1 + a2 * g2)
    P[1] = 0.5 * (a1 * (-a1 - 2.0 * a2 * g1) + a2 * (-a2 - 2.0 * a1 * g2))
    P[2] = 0.5 * (a1 * (2.0 * a1 * a2 + a2 * a2 * g1) + a2 * (2.0 * a1 * a2 + a1 * a1 * g2))
    P[3] = 0.5 * (a1 * (-a1 * a2 * a2) + a2 * (-a2 * a1 * a1))


def series_scan(double a1, double a2, double B1, double B2, double y, int wm):
    cdef double U[5]
    cdef double P[4]
    cdef double win[4]
    cdef double log_scale, log_y, s = 0.0, comp = 0.0, log_max = -INFINITY
    cdef double log_rmax = -INFINITY, cn, lt, t, tot, acc, nxt, big, log_q
    cdef double env_max = -INFINITY, env_acc = 0.0
    cdef int n, k, idx
    _poly_coeffs(a1, a2, B1, B2, U, P)
    log_scale = -0.5 * (B1 + B2) + 0.5 * (log(a1) + log(a2))
    log_y = log(y)
    win[0] = 1.0
    win[1] = 0.0
    win[2] = 0.0
    win[3] = 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] env = np.empty(wm + 1)
    cdef int n_env = 0
    for n in range(wm + 1):
        cn = win[0]
        if cn != 0.0 and log(fabs(cn)) + log_scale > log_rmax:
            log_rmax = log(fabs(cn)) + log_scale
        log_q = (n + 1) * log_y - lgamma(n + 2)
        if log_rmax > -INFINITY:
            lt = log_rmax + log_q
            env[n_env] = lt
            n_env += 1
            if lt > log_max:
                log_max = lt
        if cn != 0.0:
            lt = log(fabs(cn)) + log_scale + log_q
            t = exp(lt) if lt < 709.0 else INFINITY
            if (cn < 0.0) != (n % 2 == 1):
                t = -t
            tot = s + t
            if fabs(s) >= fabs(t):
                comp += (s - tot) + t
            else:
                comp += (t - tot) + s
            s = tot
        if n == wm:
            break
        acc = 0.0
        for k in range(4):
            if n - k >= 0:
                acc += P[k] * win[k]
        for k in range(1, 5):
            idx = n + 1 - k
            if idx >= 0:
                acc -= U[k] * idx * win[k - 1]
        nxt = acc / (n + 1)
        win[3] = win[2]
        win[2] = win[1]
        win[1] = win[0]
        win[0] = nxt
        big = fmax4(win)
        if big > _RESCALE:
            for k in range(4):
                win[k] /= _RESCALE
            log_scale += log(_RESCALE)
        elif big > 0.0 and big < 1.0 / _RESCALE:
            for k in range(4):
                win[k] *= _RESCALE
            log_scale -= log(_RESCALE)
    cdef double log_sum = -INFINITY
    if n_env > 0:
        for k in range(n_env):
            env_acc += exp(env[k] - log_max)
        log_sum = log_max + log(env_acc)
    return s + comp, log_max, log_sum


cdef inline double fmax4(double* w) noexcept:
    cdef double m = fabs(w[0])
    cdef int k
    for k in range(1, 4):
        if fabs(w[k]) > m:
            m = fabs(w[k])
    return m


def series_mp(double a1, double a2, double B1, double B2, double y, int wm, long bits):
    cdef __mpfr_struct A1, A2, G1, G2, E1, E2, Y, T, T2, Q, TOT, ACC, HALF
    cdef __mpfr_struct U[5]
    cdef __mpfr_struct P[4]
    cdef __mpfr_struct W[4]
    cdef int n, k, idx
    cdef double out
    for v in range(5):
        mpfr_init2(&U[v], bits)
    for v in range(4):
        mpfr_init2(&P[v], bits)
        mpfr_init2(&W[v], bits)
    mpfr_init2(&A1, bits); mpfr_init2(&A2, bits); mpfr_init2(&G1, bits); mpfr_init2(&G2, bits)
    mpfr_init2(&E1, bits); mpfr_init2(&E2, bits); mpfr_init2(&Y, bits); mpfr_init2(&T, bits)
    mpfr_init2(&T2, bits); mpfr_init2(&Q, bits); mpfr_init2(&TOT, bits); mpfr_init2(&ACC, bits)
    mpfr_init2(&HALF, bits)

    mpfr_set_d(&A1, a1, MPFR_RNDN)
    mpfr_set_d(&A2, a2, MPFR_RNDN)
    mpfr_set_d(&G1, B1, MPFR_RNDN)
    mpfr_ui_sub(&G1, 1, &G1, MPFR_RNDN)
    mpfr_set_d(&G2, B2, MPFR_RNDN)
    mpfr_ui_sub(&G2, 1, &G2, MPFR_RNDN)
    mpfr_set_d(&Y, y, MPFR_RNDN)
    mpfr_set_d(&HALF, 0.5, MPFR_RNDN)
    mpfr_add(&E1, &A1, &A2, MPFR_RNDN)
    mpfr_mul(&E2, &A1, &A2, MPFR_RNDN)

    # U = 1 - 2 e1 s + (e1^2 + 2 e2) s^2 - 2 e1 e2 s^3 + e2^2 s^4
    mpfr_set_ui(&U[0], 1, MPFR_RNDN)
    mpfr_mul_si(&U[1], &E1, -2, MPFR_RNDN)
    mpfr_mul(&T, &E1, &E1, MPFR_RNDN)
    mpfr_mul_ui(&T2, &E2, 2, MPFR_RNDN)
    mpfr_add(&U[2], &T, &T2, MPFR_RNDN)
    mpfr_mul(&T, &E1, &E2, MPFR_RNDN)
    mpfr_mul_si(&U[3], &T, -2, MPFR_RNDN)
    mpfr_mul(&U[4], &E2, &E2, MPFR_RNDN)

    # P0 = (a1 g1 + a2 g2)/2
    mpfr_mul(&T, &A1, &G1, MPFR_RNDN)
    mpfr_mul(&T2, &A2, &G2, MPFR_RNDN)
    mpfr_add(&T, &T, &T2, MPFR_RNDN)
    mpfr_mul(&P[0], &T, &HALF, MPFR_RNDN)
    # P1 = (a1 (-a1 - 2 a2 g1) + a2 (-a2 - 2 a1 g2))/2 = (-a1^2 - a2^2 - 2 e2 (g1 + g2))/2
    mpfr_mul(&T, &A1, &A1, MPFR_RNDN)
    mpfr_mul(&T2, &A2, &A2, MPFR_RNDN)
    mpfr_add(&T, &T, &T2, MPFR_RNDN)
    mpfr_add(&T2, &G1, &G2, MPFR_RNDN)
    mpfr_mul(&T2, &T2, &E2, MPFR_RNDN)
    mpfr_mul_ui(&T2, &T2, 2, MPFR_RNDN)
    mpfr_add(&T, &T, &T2, MPFR_RNDN)
    mpfr_neg(&T, &T, MPFR_RNDN)
    mpfr_mul(&P[1], &T, &HALF, MPFR_RNDN)
    # P2 = (4 e2 e1 ... ) expanded: a1(2 a1 a2 + a2^2 g1) + a2(2 a1 a2 + a1^2 g2)
    #    = 2 e2 e1 + e2 (a2 g1 + a1 g2)
    mpfr_mul(&T, &A2, &G1, MPFR_RNDN)
    mpfr_mul(&T2, &A1, &G2, MPFR_RNDN)
    mpfr_add(&T, &T, &T2, MPFR_RNDN)
    mpfr_mul_ui(&T2, &E1, 2, MPFR_RNDN)
    mpfr_add(&T, &T, &T2, MPFR_RNDN)
    mpfr_mul(&T, &T, &E2, MPFR_RNDN)
    mpfr_mul(&P[2], &T, &HALF, MPFR_RNDN)
    # P3 = -(a1 a2)^2
    mpfr_mul(&T, &E2, &E2, MPFR_RNDN)
    mpfr_neg(&P[3], &T, MPFR_RNDN)

    # c0 = exp(-(B1 + B2)/2) sqrt(a1 a2)
    mpfr_set_d(&T, B1, MPFR_RNDN)
    mpfr_set_d(&T2, B2, MPFR_RNDN)
    mpfr_add(&T, &T, &T2, MPFR_RNDN)
    mpfr_mul(&T, &T, &HALF, MPFR_RNDN)
    mpfr_neg(&T, &T, MPFR_RNDN)
    mpfr_exp(&T, &T, MPFR_RNDN)
    mpfr_sqrt(&T2, &E2, MPFR_RNDN)
    mpfr_mul(&W[0], &T, &T2, MPFR_RNDN)
    for k in range(1, 4):
        mpfr_set_ui(&W[k], 0, MPFR_RNDN)

    mpfr_set(&Q, &Y, MPFR_RNDN)
    mpfr_set_ui(&TOT, 0, MPFR_RNDN)
    for n in range(wm + 1):
        mpfr_mul(&T, &W[0], &Q, MPFR_RNDN)
        if n % 2:
            mpfr_sub(&TOT, &TOT, &T, MPFR_RNDN)
        else:
            mpfr_add(&TOT, &TOT, &T, MPFR_RNDN)
        if n == wm:
            break
        mpfr_mul(&ACC, &P[0], &W[0], MPFR_RNDN)
        for k in range(1, 4):
            if n - k >= 0:
                mpfr_fma(&ACC, &P[k], &W[k], &ACC, MPFR_RNDN)
        for k in range(1, 5):
            idx = n + 1 - k
            if idx > 0:
                mpfr_mul_ui(&T, &U[k], idx, MPFR_RNDN)
                mpfr_mul(&T, &T, &W[k - 1], MPFR_RNDN)
                mpfr_sub(&ACC, &ACC, &T, MPFR_RNDN)
        mpfr_div_ui(&ACC, &ACC, n + 1, MPFR_RNDN)
        # rotate window: W3 <- W2 <- W1 <- W0 <- ACC
        mpfr_set(&W[3], &W[2], MPFR_RNDN)
        mpfr_set(&W[2], &W[1], MPFR_RNDN)
        mpfr_set(&W[1], &W[0], MPFR_RNDN)
        mpfr_set(&W[0], &ACC, MPFR_RNDN)
        mpfr_mul(&Q, &Q, &Y, MPFR_RNDN)
        mpfr_div_ui(&Q, &Q, n + 2, MPFR_RNDN)
    out = mpfr_get_d(&TOT, MPFR_RNDN)

    for v in range(5):
        mpfr_clear(&U[v])
    for v in range(4):
        mpfr_clear(&P[v])
        mpfr_clear(&W[v])
    mpfr_clear(&A1); mpfr_clear(&A2); mpfr_clear(&G1); mpfr_clear(&G2)
    mpfr_clear(&E1); mpfr_clear(&E2); mpfr_clear(&Y); mpfr_clear(&T)
    mpfr_clear(&T2); mpfr_clear(&Q); mpfr_clear(&TOT); mpfr_clear(&ACC)
    mpfr_clear(&HALF)
    return out


def neumaier_sum(cnp.ndarray[cnp.float64_t, ndim=1] values):
    cdef double s = 0.0, comp = 0.0, v, tot
    cdef Py_ssize_t i
    for i in range(values.shape[0]):
        v = values[i]
        tot = s + v
        if fabs(s) >= fabs(v):
            comp += (s - tot) + v
        else:
            comp += (v - tot) + s
        s = tot
    return s + comp
