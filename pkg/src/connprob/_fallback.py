"""Pure-Python implementations of the hot kernels.

Signatures and results match ``_kernels.pyx``; ``kernels.py`` picks one at
import time. Extended precision uses :mod:`decimal` (libmpdec).
"""
from __future__ import annotations

import math
from decimal import Decimal, localcontext

import numpy as np

BACKEND = "python"

_RESCALE = 1e150
_LOG_RESCALE = math.log(_RESCALE)


def coeff_series(lam1: float, lam2: float, b1sq: float, b2sq: float, W: int):
    """Return ``(d, c)``: ``d[k-1] = d_k`` for k=1..W and ``c[w]`` for w=0..W."""
    w = np.arange(1, W + 1, dtype=float)
    d = np.zeros(W)
    for lam, bsq in ((lam1, b1sq), (lam2, b2sq)):
        d += 0.5 * (1.0 - w * bsq) * (2.0 * lam) ** (-w)
    c = np.empty(W + 1)
    c[0] = math.exp(-0.5 * (b1sq + b2sq)) / math.sqrt(4.0 * lam1 * lam2)
    for k in range(1, W + 1):
        c[k] = float(np.dot(d[k - 1 :: -1], c[:k])) / k
    return d, c


def _poly_coeffs(a1, a2, B1, B2, one, half):
    # U = (1 - a1 s)^2 (1 - a2 s)^2 ; P from C'/C = sum_j a_j/(2u_j) - B_j a_j/(2u_j^2)
    e1 = a1 + a2
    e2 = a1 * a2
    U = (one, -2 * e1, e1 * e1 + 2 * e2, -2 * e1 * e2, e2 * e2)
    g1 = one - B1
    g2 = one - B2
    P = (
        half * (a1 * g1 + a2 * g2),
        half * (a1 * (-a1 - 2 * a2 * g1) + a2 * (-a2 - 2 * a1 * g2)),
        half * (a1 * (2 * a1 * a2 + a2 * a2 * g1) + a2 * (2 * a1 * a2 + a1 * a1 * g2)),
        half * (a1 * (-a1 * a2 * a2) + a2 * (-a2 * a1 * a1)),
    )
    return U, P


def series_scan(a1: float, a2: float, B1: float, B2: float, y: float, wm: int):
    """Double-precision pass over the alternating series up to degree ``wm``.

    Coefficients come from the fourth-order recurrence equivalent to the
    convolution definition, kept in a rescaled window so they never overflow.
    Terms are formed from log-magnitudes with the sign tracked separately and
    accumulated with Neumaier's compensated sum.

    Returns ``(value, log_max_abs_term, log_sum_abs_terms)``.
    """
    U, P = _poly_coeffs(a1, a2, B1, B2, 1.0, 0.5)
    log_c0 = -0.5 * (B1 + B2) + 0.5 * (math.log(a1) + math.log(a2))
    log_y = math.log(y)
    win = [1.0, 0.0, 0.0, 0.0]  # c_n, c_{n-1}, c_{n-2}, c_{n-3}, scaled
    log_scale = log_c0
    s = 0.0
    comp = 0.0
    log_max = -math.inf
    log_rmax = -math.inf  # log max |c_r| so far
    abs_terms = []
    for n in range(wm + 1):
        cn = win[0]
        if cn != 0.0:
            log_rmax = max(log_rmax, math.log(abs(cn)) + log_scale)
        if log_rmax > -math.inf:
            log_q = (n + 1) * log_y - math.lgamma(n + 2)
            lt_env = log_rmax + log_q
            abs_terms.append(lt_env)
            if lt_env > log_max:
                log_max = lt_env
        if cn != 0.0:
            lt = math.log(abs(cn)) + log_scale + (n + 1) * log_y - math.lgamma(n + 2)
            t = math.exp(lt) if lt < 709.0 else math.inf
            if (cn < 0.0) != (n % 2 == 1):
                t = -t
            tot = s + t
            if abs(s) >= abs(t):
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
        win = [nxt, win[0], win[1], win[2]]
        big = max(abs(v) for v in win)
        if big > _RESCALE:
            win = [v / _RESCALE for v in win]
            log_scale += _LOG_RESCALE
        elif 0.0 < big < 1.0 / _RESCALE:
            win = [v * _RESCALE for v in win]
            log_scale -= _LOG_RESCALE
    if abs_terms:
        m = max(abs_terms)
        log_sum = m + math.log(sum(math.exp(v - m) for v in abs_terms))
    else:
        log_sum = -math.inf
    return s + comp, log_max, log_sum


def series_mp(a1: float, a2: float, B1: float, B2: float, y: float, wm: int, bits: int) -> float:
    """Alternating series evaluated with ``bits`` of working precision."""
    digits = int(math.ceil(bits * math.log10(2.0))) + 4
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.Emax = 10**8
        ctx.Emin = -(10**8)
        a1d, a2d, B1d, B2d, yd = (Decimal(v) for v in (a1, a2, B1, B2, y))
        one = Decimal(1)
        half = Decimal("0.5")
        U, P = _poly_coeffs(a1d, a2d, B1d, B2d, one, half)
        c0 = (-(B1d + B2d) * half).exp() * (a1d * a2d).sqrt()
        win = [c0, Decimal(0), Decimal(0), Decimal(0)]
        q = yd
        total = Decimal(0)
        for n in range(wm + 1):
            if n % 2:
                total -= win[0] * q
            else:
                total += win[0] * q
            if n == wm:
                break
            acc = P[0] * win[0]
            for k in range(1, 4):
                if n - k >= 0:
                    acc += P[k] * win[k]
            for k in range(1, 5):
                idx = n + 1 - k
                if idx >= 0:
                    acc -= U[k] * idx * win[k - 1]
            win = [acc / (n + 1), win[0], win[1], win[2]]
            q = q * yd / (n + 2)
        return float(total)


def neumaier_sum(values) -> float:
    s = 0.0
    comp = 0.0
    for v in values:
        v = float(v)
        tot = s + v
        if abs(s) >= abs(v):
            comp += (s - tot) + v
        else:
            comp += (v - tot) + s
        s = tot
    return s + comp
