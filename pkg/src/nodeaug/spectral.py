"""Unnormalized-Laplacian spectral clustering and the density-based cluster-count rule."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BadParams, ConvergenceFailure, EmptyCluster
from .graph import Graph

# above this size the dense Jacobi sweep is replaced by LAPACK
JACOBI_LIMIT = 600


@dataclass(frozen=True, eq=False)
class ClusterResult:
    k: int
    assignment: np.ndarray
    centers: np.ndarray
    embedding: np.ndarray


def unnormalized_laplacian(graph: Graph) -> np.ndarray:
    A = graph.adjacency()
    return np.diag(A.sum(axis=1)) - A


def smallest_eigenpairs(L, k: int, tol: float = 1e-8):
    """The ``k`` smallest eigenpairs of symmetric ``L``, ascending.

    Each eigenvector has its largest-magnitude entry made positive so the
    output is reproducible.  Raises ``ConvergenceFailure`` when the
    residual contract ``||L v - lam v|| <= tol ||L||_F`` is not met.
    """
    L = np.asarray(L, dtype=np.float64)
    n = L.shape[0]
    if L.ndim != 2 or L.shape[1] != n:
        raise BadParams("L must be square")
    if not 1 <= k <= n:
        raise BadParams(f"need 1 <= k <= n, got k={k}, n={n}")
    if not np.allclose(L, L.T, rtol=0, atol=1e-12 * max(1.0, np.abs(L).max())):
        raise BadParams("L must be symmetric")
    try:
        if n <= JACOBI_LIMIT:
            w, V = kernels.symmetric_eigh(L)
        else:
            w, V = kernels.python_backend.symmetric_eigh(L)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    w, V = w[:k].copy(), V[:, :k].copy()
    for j in range(k):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    fro = max(np.linalg.norm(L), 1.0)
    resid = np.linalg.norm(L @ V - V * w, axis=0)
    if np.any(resid > tol * fro) or np.abs(V.T @ V - np.eye(k)).max() > tol:
        raise ConvergenceFailure("eigenpairs fail the residual/orthonormality contract")
    return w, V


def _kmeans_pp(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[chosen].copy()


def _fill_empty(points, labels, centroids, dists, k):
    """Move the point farthest from its centroid into each empty cluster."""
    dists = dists.copy()
    for j in range(k):
        if np.any(labels == j):
            continue
        counts = np.bincount(labels, minlength=k)
        movable = counts[labels] > 1
        cand = np.where(movable, dists, -np.inf)
        i = int(np.argmax(cand))
        labels[i] = j
        centroids[j] = points[i]
        dists[i] = -np.inf
    return labels, centroids


def kmeans(points, k: int, rng=None, max_iters: int = 100) -> np.ndarray:
    """Lloyd's k-means with k-means++ seeding; returns an assignment with no empty cluster."""
    rng = np.random.default_rng(rng)
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    n = P.shape[0]
    if not 1 <= k <= n:
        raise BadParams(f"need 1 <= k <= n, got k={k}, n={n}")
    centroids = _kmeans_pp(P, k, rng)
    labels, dists = kernels.kmeans_assign(P, centroids)
    for _ in range(max_iters):
        labels, centroids = _fill_empty(P, labels, centroids, dists, k)
        new = np.vstack([P[labels == j].mean(axis=0) for j in range(k)])
        shift = np.abs(new - centroids).max()
        centroids = new
        labels, dists = kernels.kmeans_assign(P, centroids)
        if shift < 1e-9:
            break
    labels, _ = _fill_empty(P, labels, centroids, dists, k)
    return labels


def cluster_center(member_rows, member_ids) -> int:
    """Member with the least mean embedding distance to its cluster mates (ties -> lowest id)."""
    ids = np.asarray(member_ids, dtype=np.int64).reshape(-1)
    if ids.size == 0:
        raise EmptyCluster("cluster has no members")
    rows = np.asarray(member_rows, dtype=np.float64).reshape(len(ids), -1)
    if len(ids) == 1:
        return int(ids[0])
    md = kernels.mean_distances(rows)
    best = md.min()
    return int(ids[md == best].min())


def spectral_cluster(graph: Graph, k: int, rng=None) -> ClusterResult:
    rng = np.random.default_rng(rng)
    if not 1 <= k <= graph.n:
        raise BadParams(f"need 1 <= k <= n, got k={k}, n={graph.n}")
    _, U = smallest_eigenpairs(unnormalized_laplacian(graph), k)
    raw = kmeans(U, k, rng)
    # relabel clusters by their lowest member id
    first = {}
    for i, lab in enumerate(raw.tolist()):
        first.setdefault(lab, len(first))
    assignment = np.array([first[lab] for lab in raw.tolist()], dtype=np.int64)
    centers = np.array(
        [cluster_center(U[assignment == j], np.flatnonzero(assignment == j)) for j in range(k)],
        dtype=np.int64,
    )
    return ClusterResult(k, assignment, centers, U)


def kary_tree_max_edges(K: int, L: int) -> int:
    """Edges of a complete tree with root degree ``K``, inner degree ``K``, depth ``L``."""
    if int(K) != K or int(L) != L or K < 2 or L < 1:
        raise BadParams("need integers K >= 2 and L >= 1")
    K, L = int(K), int(L)
    if K == 2:
        return 2 * L
    return K * ((K - 1) ** L - 1) // (K - 2)


def recommended_cluster_count(ref_count, ref_density, target_density) -> tuple[int, int]:
    """Scale a known-good node count inversely with density.

    Returns ``(floor(N * d1 / d2), that value rounded to the nearest multiple of 10, min 10)``.
    """
    if not (ref_count > 0 and ref_density > 0 and target_density > 0):
        raise BadParams("counts and densities must be positive")
    raw = math.floor(ref_count * ref_density / target_density)
    rounded = max(10, 10 * math.floor(raw / 10 + 0.5))
    return raw, rounded
