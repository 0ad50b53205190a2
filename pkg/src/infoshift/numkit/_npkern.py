"""Numpy fallback for the compiled kernels.

Mirrors the call signatures and the operation order of ``_ckern`` so both
backends agree to rounding error.  Selected by :mod:`infoshift.numkit.backend`
when the extension is unavailable or INFOSHIFT_PURE_PY=1.
"""

from __future__ import annotations

import math

import numpy as np


def jacobi_eig(a: np.ndarray, v: np.ndarray, max_sweeps: int, tol: float):
    n = a.shape[0]
    v[:] = np.eye(n)

    def _off(mat: np.ndarray) -> float:
        upper = mat[np.triu_indices(n, k=1)]
        return math.sqrt(2.0 * float(np.dot(upper, upper))) if n > 1 else 0.0

    for sweep in range(max_sweeps):
        resid = _off(a)
        if resid <= tol:
            return sweep, resid
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return max_sweeps, _off(a)


def mlp2_forward(x, w1, b1, w2, b2, hid, out):
    np.tanh(x @ w1 + b1, out=hid)
    np.matmul(hid, w2, out=out)
    out += b2


def mlp2_backward(x, hid, w1, w2, gout, dw1, db1, dw2, db2, dz, dx, compute_dx):
    np.matmul(gout, w2.T, out=dz)
    dz *= 1.0 - hid * hid
    dw2 += hid.T @ gout
    db2 += gout.sum(axis=0)
    dw1 += x.T @ dz
    db1 += dz.sum(axis=0)
    if compute_dx:
        np.matmul(dz, w1.T, out=dx)


def adamw_update(p, g, m, v, t, lr, beta1, beta2, eps, wd):
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    p -= lr * ((m / bc1) / (np.sqrt(v / bc2) + eps) + wd * p)
