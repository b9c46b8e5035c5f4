"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built or ``NODEAUG_PURE_PYTHON=1``.  The
eigensolver delegates to LAPACK through ``numpy.linalg.eigh`` rather than
running Jacobi rotations one at a time in the interpreter.
"""
import numpy as np


def symmetric_eigh(a, tol=1e-14, max_sweeps=100):
    w, v = np.linalg.eigh(np.asarray(a, dtype=np.float64))
    order = np.argsort(w, kind="stable")
    return w[order], np.ascontiguousarray(v[:, order])


def kmeans_assign(points, centroids):
    P = np.asarray(points, dtype=np.float64)
    C = np.asarray(centroids, dtype=np.float64)
    d = ((P[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    labels = d.argmin(axis=1)
    return labels.astype(np.int64), d[np.arange(len(P)), labels]


def mean_distances(rows):
    R = np.asarray(rows, dtype=np.float64)
    m = R.shape[0]
    if m < 2:
        return np.zeros(m)
    d = np.sqrt(((R[:, None, :] - R[None, :, :]) ** 2).sum(axis=2))
    return d.sum(axis=1) / (m - 1)


def pair_distances(P, Q):
    A = np.asarray(P, dtype=np.float64)
    B = np.asarray(Q, dtype=np.float64)
    diff = A - B
    absdiff = np.abs(diff)
    na = np.sqrt((A * A).sum(axis=1))
    nb = np.sqrt((B * B).sum(axis=1))
    Ac = A - A.mean(axis=1, keepdims=True)
    Bc = B - B.mean(axis=1, keepdims=True)
    cna = np.sqrt((Ac * Ac).sum(axis=1))
    cnb = np.sqrt((Bc * Bc).sum(axis=1))
    sq = (diff * diff).sum(axis=1)
    man = absdiff.sum(axis=1)
    den = np.abs(A) + np.abs(B)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where((na > 0) & (nb > 0), 1.0 - (A * B).sum(axis=1) / (na * nb), 1.0)
        corr = np.where((cna > 0) & (cnb > 0), 1.0 - (Ac * Bc).sum(axis=1) / (cna * cnb), 1.0)
        canb = np.where(den > 0, absdiff / np.where(den > 0, den, 1.0), 0.0).sum(axis=1)
        bsum = np.abs(A + B).sum(axis=1)
        bray = np.where(bsum > 0, man / np.where(bsum > 0, bsum, 1.0), 0.0)
    out = np.stack([cos, np.sqrt(sq), corr, absdiff.max(axis=1, initial=0.0), man, sq, canb, bray],
                   axis=1)
    out[np.all(A == B, axis=1)] = 0.0
    return out
