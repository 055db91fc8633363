"""Compiled double-precision orbit loop shared by dynamics and metrics.

The kernel only uses IEEE basic arithmetic, floor and log on scalars, so an
orbit is a pure function of its start point, independent of which thread
runs it.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numba import njit

from .geometry import build_domain
from .ring import is_hex, omega

RUNNING = 0
HIT_ZERO = 1
BOUNDARY = 2
PRECISION = 3

_SCALE = 2.0 ** -256
_SCALE_AT = 2.0 ** 256


@lru_cache(maxsize=None)
def domain_params(d: int):
    """Tuple of arrays/scalars the kernel needs for ring d."""
    dom = build_domain(d)
    w = omega(d)
    return (
        1 if is_hex(d) else 0,
        float(w.real),
        float(w.imag),
        np.ascontiguousarray(dom.normals.real),
        np.ascontiguousarray(dom.normals.imag),
        np.ascontiguousarray(dom.offsets),
        float(dom.R),
    )


@njit(cache=True, nogil=True)
def _round(wr, wi, hexflag, om_r, om_i, n_re, n_im, offs):
    # nearest lattice point to wr + i*wi, and wall margin of the remainder
    bf = wi / om_i
    b0 = math.floor(bf)
    best = 1e300
    ba = 0
    bb = 0
    for b in range(b0 - 1, b0 + 3):
        ac = wr - b * om_r
        a0 = math.floor(ac + 0.5)
        for a in range(a0 - 1, a0 + 2):
            ur = wr - (a + b * om_r)
            ui = wi - b * om_i
            q = ur * ur + ui * ui
            if q < best:
                best = q
                ba = a
                bb = b
    ur = wr - (ba + bb * om_r)
    ui = wi - bb * om_i
    margin = 1e300
    for k in range(offs.shape[0]):
        m = offs[k] - (ur * n_re[k] + ui * n_im[k])
        if m < margin:
            margin = m
    return ba, bb, ur, ui, margin


@njit(cache=True, nogil=True)
def orbit_kernel(zr, zi, n_total, burn, hexflag, om_r, om_i, n_re, n_im, offs,
                 eps_tie, res_tol, out_a, out_b, out_logz):
    """Iterate T_d from zr + i*zi.

    The first `burn` digits are computed but not stored; the next digits go
    into out_a/out_b (basis coordinates) and out_logz (log|z_j| of the point
    the digit was read from).  Returns (status, n_stored, end_re, end_im).
    Convergents are tracked as floats, rescaled by exact powers of two, to
    monitor the reconstruction residual |z_0 - h_b(z_n)|.
    """
    z0r = zr
    z0i = zi
    # (P_prev, P_cur, Q_prev, Q_cur) = identity
    ppr, ppi, pcr, pci = 1.0, 0.0, 0.0, 0.0
    qpr, qpi, qcr, qci = 0.0, 0.0, 1.0, 0.0
    stored = 0
    total = burn + n_total
    for step in range(total):
        r2 = zr * zr + zi * zi
        if r2 == 0.0:
            return HIT_ZERO, stored, zr, zi
        wr = zr / r2
        wi = -zi / r2
        a, b, ur, ui, margin = _round(wr, wi, hexflag, om_r, om_i, n_re, n_im, offs)
        wabs = math.sqrt(wr * wr + wi * wi)
        if margin <= eps_tie * max(1.0, wabs):
            return BOUNDARY, stored, zr, zi
        if step >= burn:
            out_a[stored] = a
            out_b[stored] = b
            out_logz[stored] = 0.5 * math.log(r2)
            stored += 1
        # digit as complex
        dr = a + b * om_r
        di = b * om_i
        # P_new = d * P_cur + P_prev
        npr = dr * pcr - di * pci + ppr
        npi = dr * pci + di * pcr + ppi
        nqr = dr * qcr - di * qci + qpr
        nqi = dr * qci + di * qcr + qpi
        ppr, ppi, pcr, pci = pcr, pci, npr, npi
        qpr, qpi, qcr, qci = qcr, qci, nqr, nqi
        if abs(qcr) + abs(qci) > _SCALE_AT:
            ppr *= _SCALE
            ppi *= _SCALE
            pcr *= _SCALE
            pci *= _SCALE
            qpr *= _SCALE
            qpi *= _SCALE
            qcr *= _SCALE
            qci *= _SCALE
        zr = ur
        zi = ui
        # residual |z0 - (P_prev z + P_cur)/(Q_prev z + Q_cur)|
        numr = ppr * zr - ppi * zi + pcr
        numi = ppr * zi + ppi * zr + pci
        denr = qpr * zr - qpi * zi + qcr
        deni = qpr * zi + qpi * zr + qci
        dd = denr * denr + deni * deni
        hr = (numr * denr + numi * deni) / dd
        hi = (numi * denr - numr * deni) / dd
        res = math.sqrt((hr - z0r) ** 2 + (hi - z0i) ** 2)
        if not (res <= res_tol):
            return PRECISION, stored, zr, zi
    return RUNNING, stored, zr, zi


def run_orbit(z0: complex, d: int, n: int, burn: int = 0, eps_tie: float = 1e-12,
              res_tol: float = 1e-6):
    """Python wrapper: returns (status, a, b, logz, end) with arrays of stored length."""
    hexflag, om_r, om_i, n_re, n_im, offs, _ = domain_params(d)
    out_a = np.empty(n, dtype=np.int64)
    out_b = np.empty(n, dtype=np.int64)
    out_logz = np.empty(n, dtype=np.float64)
    status, k, er, ei = orbit_kernel(float(z0.real), float(z0.imag), n, burn, hexflag,
                                     om_r, om_i, n_re, n_im, offs, eps_tie, res_tol,
                                     out_a, out_b, out_logz)
    return int(status), out_a[:k], out_b[:k], out_logz[:k], complex(er, ei)
