# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.  Signatures mirror ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def symmetric_eigh(a, double tol=1e-14, int max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues ascending, eigenvectors as columns)``.  Raises
    ``RuntimeError`` when the off-diagonal mass does not fall below
    ``tol * ||a||_F`` within ``max_sweeps`` sweeps.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] Am = A
    cdef double[:, ::1] Vm = V
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double fro = 0.0, off, apq, theta, t, c, s, akp, akq
    for p in range(n):
        for q in range(n):
            fro += Am[p, q] * Am[p, q]
    fro = sqrt(fro)
    if n < 2 or fro == 0.0:
        w = np.diag(A).copy()
        order = np.argsort(w, kind="stable")
        return w[order], V[:, order]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * Am[p, q] * Am[p, q]
        if sqrt(off) <= tol * fro:
            break
        if sweep == max_sweeps:
            raise RuntimeError("Jacobi sweeps did not converge")
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = Am[p, q]
                if apq == 0.0:
                    continue
                theta = (Am[q, q] - Am[p, p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = Am[k, p]
                    akq = Am[k, q]
                    Am[k, p] = c * akp - s * akq
                    Am[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = Am[p, k]
                    akq = Am[q, k]
                    Am[p, k] = c * akp - s * akq
                    Am[q, k] = s * akp + c * akq
                Am[p, q] = 0.0
                Am[q, p] = 0.0
                for k in range(n):
                    akp = Vm[k, p]
                    akq = Vm[k, q]
                    Vm[k, p] = c * akp - s * akq
                    Vm[k, q] = s * akp + c * akq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def kmeans_assign(points, centroids):
    """Nearest centroid per point (ties -> lowest index) and squared distance."""
    cdef double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] C = np.ascontiguousarray(centroids, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0], k = C.shape[0], dim = P.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best = np.zeros(n, dtype=np.float64)
    cdef Py_ssize_t i, j, t
    cdef double d, diff, bd
    cdef long long bj
    for i in range(n):
        bd = -1.0
        bj = 0
        for j in range(k):
            d = 0.0
            for t in range(dim):
                diff = P[i, t] - C[j, t]
                d += diff * diff
            if bd < 0 or d < bd:
                bd = d
                bj = j
        labels[i] = bj
        best[i] = bd
    return labels, best


def mean_distances(rows):
    """Mean Euclidean distance from each row to every other row (0 for a singleton)."""
    cdef double[:, ::1] R = np.ascontiguousarray(rows, dtype=np.float64)
    cdef Py_ssize_t m = R.shape[0], dim = R.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, t
    cdef double d, diff
    if m < 2:
        return out
    for i in range(m):
        for j in range(i + 1, m):
            d = 0.0
            for t in range(dim):
                diff = R[i, t] - R[j, t]
                d += diff * diff
            d = sqrt(d)
            o[i] += d
            o[j] += d
    for i in range(m):
        o[i] /= (m - 1)
    return out


def pair_distances(P, Q):
    """Row-wise distances: cosine, euclidean, correlation, chebyshev,
    manhattan, sqeuclidean, canberra, braycurtis."""
    cdef double[:, ::1] A = np.ascontiguousarray(P, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(Q, dtype=np.float64)
    cdef Py_ssize_t m = A.shape[0], dim = A.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((m, 8), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, t
    cdef double a, b, diff, dot, na, nb, ma, mb, cdot, cna, cnb, sq, cheb, man, canb, bsum, den
    cdef bint same
    for i in range(m):
        same = True
        dot = 0.0; na = 0.0; nb = 0.0; ma = 0.0; mb = 0.0
        sq = 0.0; cheb = 0.0; man = 0.0; canb = 0.0; bsum = 0.0
        for t in range(dim):
            a = A[i, t]
            b = B[i, t]
            if a != b:
                same = False
            diff = a - b
            dot += a * b
            na += a * a
            nb += b * b
            ma += a
            mb += b
            sq += diff * diff
            if fabs(diff) > cheb:
                cheb = fabs(diff)
            man += fabs(diff)
            den = fabs(a) + fabs(b)
            if den > 0:
                canb += fabs(diff) / den
            bsum += fabs(a + b)
        if same:
            continue
        ma /= dim
        mb /= dim
        cdot = 0.0; cna = 0.0; cnb = 0.0
        for t in range(dim):
            a = A[i, t] - ma
            b = B[i, t] - mb
            cdot += a * b
            cna += a * a
            cnb += b * b
        if na > 0 and nb > 0:
            o[i, 0] = 1.0 - dot / (sqrt(na) * sqrt(nb))
        else:
            o[i, 0] = 1.0
        o[i, 1] = sqrt(sq)
        if cna > 0 and cnb > 0:
            o[i, 2] = 1.0 - cdot / (sqrt(cna) * sqrt(cnb))
        else:
            o[i, 2] = 1.0
        o[i, 3] = cheb
        o[i, 4] = man
        o[i, 5] = sq
        o[i, 6] = canb
        o[i, 7] = man / bsum if bsum > 0 else 0.0
    return out
