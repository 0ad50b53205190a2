# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numeric kernels: cyclic Jacobi rotations for symmetric
eigenproblems, fused two-layer perceptron passes, and the AdamW update.

Each kernel mutates caller-provided buffers and stays allocation-free, so
the Python wrappers own all array lifetimes.  The numpy fallbacks in
``_npkern`` implement the same contracts with the same operation order.
"""

from libc.math cimport fabs, sqrt, tanh


def jacobi_eig(double[:, ::1] a, double[:, ::1] v, int max_sweeps, double tol):
    """Diagonalize symmetric ``a`` in place via cyclic Jacobi rotations.

    ``v`` receives the accumulated rotation (columns are eigenvectors).
    Returns ``(sweeps_used, off_residual)`` where the residual is the
    Frobenius norm of the off-diagonal part.  The caller decides whether a
    residual above ``tol`` after ``max_sweeps`` sweeps is an error.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k, sweep
    cdef double off2, apq, theta, t, c, s, akp, akq, sgn

    for p in range(n):
        for q in range(n):
            v[p, q] = 1.0 if p == q else 0.0

    for sweep in range(max_sweeps):
        off2 = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off2 += a[p, q] * a[p, q]
        if sqrt(2.0 * off2) <= tol:
            return sweep, sqrt(2.0 * off2)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (fabs(theta) + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq

    off2 = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            off2 += a[p, q] * a[p, q]
    return max_sweeps, sqrt(2.0 * off2)


def mlp2_forward(double[:, ::1] x, double[:, ::1] w1, double[::1] b1,
                 double[:, ::1] w2, double[::1] b2,
                 double[:, ::1] hid, double[:, ::1] out):
    """Fill ``hid = tanh(x @ w1 + b1)`` and ``out = hid @ w2 + b2``."""
    cdef Py_ssize_t nb = x.shape[0]
    cdef Py_ssize_t di = x.shape[1]
    cdef Py_ssize_t nh = w1.shape[1]
    cdef Py_ssize_t do_ = w2.shape[1]
    cdef Py_ssize_t b, i, j, o
    cdef double xv, hv

    for b in range(nb):
        for j in range(nh):
            hid[b, j] = b1[j]
        for i in range(di):
            xv = x[b, i]
            for j in range(nh):
                hid[b, j] += xv * w1[i, j]
        for j in range(nh):
            hid[b, j] = tanh(hid[b, j])
        for o in range(do_):
            out[b, o] = b2[o]
        for j in range(nh):
            hv = hid[b, j]
            for o in range(do_):
                out[b, o] += hv * w2[j, o]


def mlp2_backward(double[:, ::1] x, double[:, ::1] hid,
                  double[:, ::1] w1, double[:, ::1] w2,
                  double[:, ::1] gout,
                  double[:, ::1] dw1, double[::1] db1,
                  double[:, ::1] dw2, double[::1] db2,
                  double[:, ::1] dz, double[:, ::1] dx, bint compute_dx):
    """Accumulate parameter gradients for a cached forward pass.

    ``dz`` is a (batch, hidden) scratch buffer.  All gradient buffers must
    arrive zeroed; the kernel adds into them.  ``dx`` is written only when
    ``compute_dx`` is set.
    """
    cdef Py_ssize_t nb = x.shape[0]
    cdef Py_ssize_t di = x.shape[1]
    cdef Py_ssize_t nh = w1.shape[1]
    cdef Py_ssize_t do_ = w2.shape[1]
    cdef Py_ssize_t b, i, j, o
    cdef double acc, hv, xv, gv

    for b in range(nb):
        for j in range(nh):
            acc = 0.0
            for o in range(do_):
                acc += gout[b, o] * w2[j, o]
            hv = hid[b, j]
            dz[b, j] = acc * (1.0 - hv * hv)
        for o in range(do_):
            db2[o] += gout[b, o]
        for j in range(nh):
            hv = hid[b, j]
            for o in range(do_):
                dw2[j, o] += hv * gout[b, o]
        for i in range(di):
            xv = x[b, i]
            for j in range(nh):
                dw1[i, j] += xv * dz[b, j]
        for j in range(nh):
            db1[j] += dz[b, j]
        if compute_dx:
            for i in range(di):
                acc = 0.0
                for j in range(nh):
                    acc += dz[b, j] * w1[i, j]
                dx[b, i] = acc


def adamw_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                 long t, double lr, double beta1, double beta2,
                 double eps, double wd):
    """One decoupled AdamW step on flat views, in place.  ``t`` starts at 1."""
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    cdef double bc1 = 1.0 - beta1 ** t
    cdef double bc2 = 1.0 - beta2 ** t
    cdef double mh, vh

    for i in range(n):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        mh = m[i] / bc1
        vh = v[i] / bc2
        p[i] -= lr * (mh / (sqrt(vh) + eps) + wd * p[i])
