"""Unsupervised machinery: k-means with elbow selection, DBSCAN with a
k-distance epsilon heuristic, transit-time outlier detection, simple
column filters, and a 2-component PCA for plot data.

Everything is deterministic given inputs and seed; DBSCAN expands
clusters in ascending row order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCurveError, ValidationError

ELBOW_RESTARTS = 5


@dataclass(frozen=True)
class KMeansModel:
    k: int
    centroids: np.ndarray  # (k, d)
    labels: np.ndarray  # (n,)
    inertia: float
    iterations_run: int
    inertia_history: tuple = ()

    def assign(self, X):
        """Nearest-centroid cluster ids for new points."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        d = ((X[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d, axis=1)

    def to_dict(self):
        return {"k": int(self.k), "centroids": self.centroids.tolist(),
                "inertia": self.inertia, "iterations_run": self.iterations_run}


@dataclass(frozen=True)
class DbscanModel:
    eps: float
    min_pts: int
    labels: np.ndarray  # (n,), noise = -1
    point_class: tuple  # per point: "core" | "border" | "noise"


@dataclass(frozen=True)
class PcaProjection:
    mean: np.ndarray
    components: np.ndarray  # (2, d), orthonormal rows
    explained_variance: np.ndarray  # descending
    scores: np.ndarray  # (n, 2)


def _check_matrix(X, name="X"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {X.shape}")
    if np.isnan(X).any():
        raise ValidationError(f"{name} has missing cells")
    return X


def _sq_distances(A, B):
    return np.maximum(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2), 0.0)


def _kmeans_pp_init(X, k, rng):
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = X[first]
    closest_sq = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # all remaining mass on duplicates
        else:
            idx = int(rng.choice(n, p=closest_sq / total))
        centroids[j] = X[idx]
        closest_sq = np.minimum(closest_sq, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans_fit(X, k, seed=0, max_iter=300, tol=1e-6, init_centroids=None):
    """Lloyd iterations from a k-means++ start.

    Stops when the largest centroid shift drops below ``tol``. An empty
    cluster is repaired by promoting the point farthest from its assigned
    centroid. Per-assignment inertia values are recorded and non-increasing.
    """
    X = _check_matrix(X)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, k, rng) if init_centroids is None \
        else np.array(init_centroids, dtype=np.float64)

    history = []
    labels = np.zeros(n, dtype=int)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d = _sq_distances(X, centroids)
        labels = np.argmin(d, axis=1)
        history.append(float(d[np.arange(n), labels].sum()))
        new_centroids = centroids.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centroids[j] = X[members].mean(axis=0)
        empties = [j for j in range(k) if not (labels == j).any()]
        if empties:
            point_sq = d[np.arange(n), labels]
            order = np.argsort(-point_sq, kind="stable")
            for slot, j in enumerate(empties):
                new_centroids[j] = X[order[slot]]
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift < tol and not empties:
            break

    d = _sq_distances(X, centroids)
    labels = np.argmin(d, axis=1)
    inertia = float(d[np.arange(n), labels].sum())
    history.append(inertia)
    return KMeansModel(k=k, centroids=centroids, labels=labels, inertia=inertia,
                       iterations_run=iterations, inertia_history=tuple(history))


def _best_kmeans(X, k, seed, warm_centroids=None):
    best = None
    for restart in range(ELBOW_RESTARTS):
        model = kmeans_fit(X, k, seed=np.random.SeedSequence([seed, k, restart]))
        if best is None or model.inertia < best.inertia:
            best = model
    if warm_centroids is not None:
        model = kmeans_fit(X, k, init_centroids=warm_centroids)
        if model.inertia < best.inertia:
            best = model
    return best


def elbow_select_k(X, k_range, seed=0):
    """Fit k-means over an inclusive k interval; pick the curvature elbow.

    chosen_k maximizes I(k-1) - 2 I(k) + I(k+1) over interior k (ties to
    the smaller k). Each k runs five k-means++ restarts plus a warm start
    from the previous k's solution, which keeps the curve non-increasing.
    """
    X = _check_matrix(X)
    lo, hi = int(k_range[0]), int(k_range[1])
    if hi - lo + 1 < 3:
        raise ValidationError(f"k range [{lo}, {hi}] must cover at least 3 values")
    if lo < 1 or hi > X.shape[0]:
        raise ValidationError(f"k range [{lo}, {hi}] outside [1, {X.shape[0]}]")

    ks = list(range(lo, hi + 1))
    inertias = []
    models = {}
    prev = None
    for k in ks:
        warm = None
        if prev is not None:
            # previous centroids plus the worst-covered point: k-means from
            # this start can only improve on the previous inertia
            d = _sq_distances(X, prev.centroids)
            farthest = int(np.argmax(d.min(axis=1)))
            warm = np.vstack([prev.centroids, X[farthest]])
        model = _best_kmeans(X, k, seed, warm_centroids=warm)
        models[k] = model
        inertias.append(model.inertia)
        prev = model

    curve = np.asarray(inertias)
    if curve.max() - curve.min() <= 0.0:
        raise DegenerateCurveError("degenerate curve: inertia is flat across k")
    curvature = curve[:-2] - 2.0 * curve[1:-1] + curve[2:]
    chosen = ks[1 + int(np.argmax(curvature))]
    return chosen, list(zip(ks, inertias))


def dbscan_fit(X, eps, min_pts):
    """Euclidean density clustering; noise is labeled -1.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Clusters expand from the lowest-index unvisited core
    point outward, so labels are deterministic for a fixed row order.
    """
    X = _check_matrix(X)
    if eps <= 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    if min_pts < 1:
        raise ValidationError(f"min_pts must be >= 1, got {min_pts}")
    n = X.shape[0]
    dist = np.sqrt(_sq_distances(X, X))
    within = dist <= eps
    core = within.sum(axis=1) >= min_pts

    labels = np.full(n, -1, dtype=int)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        queue = [i]
        labels[i] = cluster
        head = 0
        while head < len(queue):
            j = queue[head]
            head += 1
            if not core[j]:
                continue
            for nb in np.flatnonzero(within[j]):
                if labels[nb] == -1:
                    labels[nb] = cluster
                    queue.append(int(nb))
        cluster += 1

    point_class = tuple("core" if core[i] else ("noise" if labels[i] == -1 else "border")
                        for i in range(n))
    return DbscanModel(eps=float(eps), min_pts=int(min_pts), labels=labels,
                       point_class=point_class)


def k_distance_profile(X, k):
    """Sorted distances to each point's k-th nearest neighbor (self excluded).

    Returns (profile, suggested_eps). The suggestion sits at the knee: the
    maximum discrete curvature (second difference) of the log-scaled
    profile. Distances are positive and outliers separate multiplicatively,
    so the sharpest bend of log(distance) marks where the dense bulk ends;
    the raw-scale second difference would chase jitter inside the bulk or
    accelerations out in the sparse tail instead.
    """
    X = _check_matrix(X)
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValidationError(f"k must be in [1, {n - 1}], got {k}")
    dist = np.sqrt(_sq_distances(X, X))
    sorted_rows = np.sort(dist, axis=1)
    profile = np.sort(sorted_rows[:, k])  # column k skips the zero self-distance

    span = profile[-1] - profile[0]
    if span <= 0.0 or n < 3:
        return profile, float(profile[-1])
    floor = max(float(profile[-1]), 1e-300) * 1e-12
    logp = np.log(np.maximum(profile, floor))
    curvature = logp[2:] - 2.0 * logp[1:-1] + logp[:-2]
    knee = 1 + int(np.argmax(curvature))
    suggested = float(profile[knee])
    if suggested <= 0.0:
        suggested = float(profile[-1])
    return profile, suggested


def detect_transit_outliers(data, min_pts=None, eps=None):
    """DBSCAN noise points over z-scored (distance_km, transit_time_days).

    ``eps`` defaults to the k-distance knee with k = min_pts; ``min_pts``
    defaults to 2 * d = 4. Returns (outlier_indices, DbscanModel).
    """
    if data.n_rows == 0:
        raise ValidationError("empty dataset")
    X = data.matrix(["distance_km", "transit_time_days"])
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    if (sd == 0.0).any():
        raise ValidationError("zero-variance column; cannot z-score for detection")
    Xz = (X - mu) / sd
    if min_pts is None:
        min_pts = 2 * Xz.shape[1]
    if eps is None:
        _, eps = k_distance_profile(Xz, min_pts)
    model = dbscan_fit(Xz, eps, min_pts)
    outliers = np.flatnonzero(model.labels == -1)
    return outliers, model


def filter_outliers(column, method, threshold=None):
    """Indices kept after IQR-fence or z-score screening.

    iqr keeps [Q1 - t*IQR, Q3 + t*IQR] with linear-interpolation quartiles
    (default t=1.5); z_score keeps |x - mean| / stdev <= t (default t=3).
    """
    col = np.asarray(column, dtype=np.float64).ravel()
    if method == "iqr":
        t = 1.5 if threshold is None else float(threshold)
        if t <= 0:
            raise ValidationError(f"threshold must be > 0, got {t}")
        if col.size < 4:
            raise ValidationError(f"iqr needs at least 4 values, got {col.size}")
        q1, q3 = np.percentile(col, [25, 75])
        iqr = q3 - q1
        keep = (col >= q1 - t * iqr) & (col <= q3 + t * iqr)
        return np.flatnonzero(keep)
    if method == "z_score":
        t = 3.0 if threshold is None else float(threshold)
        if t <= 0:
            raise ValidationError(f"threshold must be > 0, got {t}")
        sd = col.std()
        if sd == 0.0:
            raise ValidationError("zero-variance column under z_score")
        keep = np.abs(col - col.mean()) / sd <= t
        return np.flatnonzero(keep)
    raise ValidationError(f"unknown method {method!r}; use 'iqr' or 'z_score'")


def jacobi_eigh(A, tol=1e-10, max_sweeps=1000):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps rotate away off-diagonal mass until its Frobenius norm falls
    below ``tol`` relative to the matrix norm. Returns (values, vectors)
    with vectors in columns, unsorted.
    """
    A = np.array(A, dtype=np.float64)
    d = A.shape[0]
    V = np.eye(d)
    scale = max(np.sqrt((A ** 2).sum()), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt((A ** 2).sum() - (np.diag(A) ** 2).sum())
        if off / scale < tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if abs(apq) / scale < tol / (d * d):
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p, rot_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * rot_p - s * rot_q
                A[:, q] = s * rot_p + c * rot_q
                rot_p, rot_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rot_p - s * rot_q
                A[q, :] = s * rot_p + c * rot_q
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V


def pca_project(X, n_components=2):
    """Top principal components of the population covariance.

    Component signs are fixed so each row's largest-magnitude entry is
    positive; explained variances are the matching eigenvalues, descending.
    """
    X = _check_matrix(X)
    n, d = X.shape
    if n < 2:
        raise ValidationError(f"need at least 2 rows, got {n}")
    if n_components > d:
        raise ValidationError(f"n_components={n_components} exceeds dimension {d}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / n
    values, vectors = jacobi_eigh(cov)
    order = np.argsort(-values, kind="stable")[:n_components]
    components = vectors[:, order].T.copy()
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    explained = np.maximum(values[order], 0.0)
    scores = Xc @ components.T
    return PcaProjection(mean=mean, components=components,
                         explained_variance=explained, scores=scores)


# -- plot-ready artifact writers (mirrors of the elbow/k-distance/PCA figures)


def write_inertia_curve_csv(path, curve):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,inertia\n")
        for k, inertia in curve:
            fh.write(f"{k},{inertia!r}\n")


def write_k_distance_csv(path, profile):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank,distance\n")
        for rank, value in enumerate(profile):
            fh.write(f"{rank},{float(value)!r}\n")


def write_pca_scatter_csv(path, scores, cluster_labels, outlier_flags=None):
    scores = np.asarray(scores)
    if outlier_flags is None:
        outlier_flags = np.zeros(scores.shape[0], dtype=bool)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("pc1,pc2,cluster_label,is_outlier\n")
        for (p1, p2), label, flag in zip(scores, cluster_labels, outlier_flags):
            fh.write(f"{float(p1)!r},{float(p2)!r},{int(label)},{int(bool(flag))}\n")
