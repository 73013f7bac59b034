"""
Contact reduction - deterministic k-means++ seeding and Lloyd clustering

Contacts are embedded as 6-vectors z = [n, sqrt(c) * p]; the axis-weighted
distance ||dn||^2 + c * ||dp||^2 is then the squared Euclidean distance
between embeddings, so centers are plain means and the Lloyd objective is
non-increasing.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist

from ..models.schema import ReductionConfig
from .contacts import ContactSet, default_metric_weight
from .errors import InsufficientPointsError, InvalidParameterError

logger = logging.getLogger(__name__)

DEGENERATE_NORMAL = 1e-6
OBJECTIVE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """
    Result of one clustering call

    Attributes:
        labels: cluster index per input contact
        centers: (k, 6) centers [n, p] in physical units (normal part not renormalized)
        iterations: Lloyd iterations performed
        converged: True when center movement fell below tol before max_iters
        objective_history: Lloyd objective after every iteration
    """

    labels: np.ndarray
    centers: np.ndarray
    iterations: int
    converged: bool
    objective_history: List[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True, eq=False)
class ReductionResult:
    contacts: ContactSet
    assignment: Optional[ClusterAssignment]

    @property
    def passed_through(self) -> bool:
        return self.assignment is None


def metric_weight(contacts: ContactSet, cfg: ReductionConfig) -> float:
    return cfg.c if cfg.c is not None else default_metric_weight(contacts.positions)


def embed(contacts: ContactSet, c: float) -> np.ndarray:
    """(n, 6) metric-space embedding [n, sqrt(c) * p]"""
    if c < 0.0:
        raise InvalidParameterError(f"metric weight c must be >= 0, got {c}")
    return np.hstack([contacts.normals, math.sqrt(c) * contacts.positions])


def _sq_dist_to(z: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = z - center
    return np.einsum("ij,ij->i", diff, diff)


def _sq_dist_matrix(z: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return cdist(z, centers, "sqeuclidean")


def _seed_indices(z: np.ndarray, k: int) -> List[int]:
    # np.argmax returns the first maximal index, which is the lowest-index tie-break.
    chosen = [int(np.argmax(_sq_dist_to(z, z.mean(axis=0))))]
    nearest = _sq_dist_to(z, z[chosen[0]])
    taken = np.zeros(z.shape[0], dtype=bool)
    taken[chosen[0]] = True
    while len(chosen) < k:
        candidates = np.where(taken, -np.inf, nearest)
        idx = int(np.argmax(candidates))
        chosen.append(idx)
        taken[idx] = True
        nearest = np.minimum(nearest, _sq_dist_to(z, z[idx]))
    return chosen


def kmeanspp_init(contacts: ContactSet, cfg: ReductionConfig) -> np.ndarray:
    """
    Deterministic farthest-point k-means++ seeding

    The first center is the point farthest from the centroid of all points;
    every further center is the not-yet-chosen point with the largest squared
    distance to its nearest chosen center. Ties go to the lowest input index.

    Returns:
        (k, 6) initial centers [n, p] taken from the input points
    """
    if len(contacts) < cfg.k:
        raise InsufficientPointsError(f"k-means++ needs at least k={cfg.k} points, got {len(contacts)}")
    c = metric_weight(contacts, cfg)
    idx = _seed_indices(embed(contacts, c), cfg.k)
    return np.hstack([contacts.normals[idx], contacts.positions[idx]])


def _repair_empty(z: np.ndarray, labels: np.ndarray, centers: np.ndarray, k: int) -> None:
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        diff = z - centers[labels]
        dist = np.einsum("ij,ij->i", diff, diff)
        movable = counts[labels] > 1
        dist = np.where(movable, dist, -np.inf)
        idx = int(np.argmax(dist))
        counts[labels[idx]] -= 1
        labels[idx] = empty
        counts[empty] = 1
        centers[empty] = z[idx]


def _means(z: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    # one bincount over (cluster, column) bins; each bin still sums in input order
    d = z.shape[1]
    counts = np.maximum(np.bincount(labels, minlength=k), 1).astype(float)
    bins = (labels[:, None] * d + np.arange(d)).ravel()
    sums = np.bincount(bins, weights=z.ravel(), minlength=k * d).reshape(k, d)
    return sums / counts[:, None]


def kmeans_cluster(contacts: ContactSet, cfg: ReductionConfig) -> ClusterAssignment:
    """
    Lloyd iterations under the axis-weighted metric

    Each iteration assigns every point to its nearest center (lowest center
    index on ties), reseeds empty clusters with the point farthest from its
    current center, then moves centers to member means. Iteration stops when
    no center moved more than tol (squared metric distance) or after max_iters.
    """
    if len(contacts) < cfg.k:
        raise InsufficientPointsError(f"clustering needs at least k={cfg.k} points, got {len(contacts)}")
    k = cfg.k
    c = metric_weight(contacts, cfg)
    z = embed(contacts, c)
    centers = z[_seed_indices(z, k)].copy()

    history: List[float] = []
    labels = np.zeros(len(contacts), dtype=np.intp)
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        labels = np.argmin(_sq_dist_matrix(z, centers), axis=1)
        _repair_empty(z, labels, centers, k)
        new_centers = _means(z, labels, k)
        residual = z - new_centers[labels]
        objective = float(np.einsum("ij,ij->", residual, residual))
        if history and objective > history[-1] + OBJECTIVE_SLACK * (1.0 + history[-1]):
            raise AssertionError(
                f"Lloyd objective increased from {history[-1]!r} to {objective!r} at iteration {iterations}")
        history.append(objective)
        shift = float(np.max(np.einsum("ij,ij->i", new_centers - centers, new_centers - centers)))
        centers = new_centers
        if shift < cfg.tol:
            converged = True
            break

    logger.debug("k-means: n=%d k=%d iterations=%d converged=%s objective=%.3e",
                 len(contacts), k, iterations, converged, history[-1])
    return ClusterAssignment(
        labels=labels,
        centers=_means(np.hstack([contacts.normals, contacts.positions]), labels, k),
        iterations=iterations,
        converged=converged,
        objective_history=history,
    )


def representative_contacts(contacts: ContactSet, assignment: ClusterAssignment) -> ContactSet:
    """
    One contact per cluster, in ascending cluster order

    position = member centroid, normal = normalized mean member normal,
    depth = deepest member, scale = 1. A mean normal shorter than 1e-6 falls
    back to the deepest member's normal (lowest input index on ties).
    """
    labels = np.asarray(assignment.labels)
    if labels.shape[0] != len(contacts):
        raise InvalidParameterError("assignment does not match the contact set")
    k = assignment.k
    counts = np.bincount(labels, minlength=k)
    occupied = np.flatnonzero(counts > 0)
    if occupied.size == 0:
        return ContactSet.empty(contacts.stiffness, contacts.damping)
    positions = _means(contacts.positions, labels, k)[occupied]
    normals = _means(contacts.normals, labels, k)[occupied]
    deepest = np.full(k, -np.inf)
    np.maximum.at(deepest, labels, contacts.depths)
    depths = deepest[occupied]
    lengths = np.sqrt(np.einsum("ij,ij->i", normals, normals))
    for row in np.flatnonzero(lengths < DEGENERATE_NORMAL):
        members = np.flatnonzero(labels == occupied[row])
        normals[row] = contacts.normals[members[int(np.argmax(contacts.depths[members]))]]
        lengths[row] = 1.0
    return ContactSet(positions, normals / lengths[:, None], depths,
                      np.ones(occupied.size), contacts.stiffness, contacts.damping)


def reduce_contacts(contacts: ContactSet, cfg: ReductionConfig) -> ReductionResult:
    """reduce() with the clustering kept for diagnostics"""
    if len(contacts) <= cfg.k:
        return ReductionResult(contacts, None)
    assignment = kmeans_cluster(contacts, cfg)
    return ReductionResult(representative_contacts(contacts, assignment), assignment)


def reduce(contacts: ContactSet, cfg: ReductionConfig) -> ContactSet:
    """Reduce a contact set to min(len, k) representatives; pass-through when len <= k"""
    return reduce_contacts(contacts, cfg).contacts
