"""
Stiffness bounding - per-contact scale factors that cap the net stiffness per axis

Solves
    min  sum_i (s_i - 1)^2
    s.t. K * sum_i s_i * c_ij <= K_max   for j = x, y, z
         0 <= s_i <= 1
with c_i = diag(n_i n_i^T). Both the solver and the oracle work on the
normalized form sum_i s_i * c_ij <= K_max / K, so multiplying K and K_max by
the same factor leaves the argmin unchanged. Axes are 0-based (0=x, 1=y, 2=z).
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import FrozenSet, List, Optional, Tuple

import numpy as np
from scipy.optimize import nnls

from ..models.schema import StiffnessBound
from .contacts import ContactSet
from .errors import InvalidParameterError, OracleSizeError, ScalingSolverError

logger = logging.getLogger(__name__)

ORACLE_MAX_CONTACTS = 6
FEASIBILITY_TOL = 1e-12
STEP_TOL = 1e-13
MULTIPLIER_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScalingProblem:
    """
    One bounding problem

    Attributes:
        c_vectors: (n, 3) per-contact axis stiffness shares, rows in [0, 1] summing to 1
        stiffness: shared contact stiffness K [N/m]
        k_max: per-axis net stiffness bound [N/m]
    """

    c_vectors: np.ndarray
    stiffness: float
    k_max: float

    def __post_init__(self):
        c = np.array(self.c_vectors, dtype=float).reshape(-1, 3)
        if not self.stiffness > 0.0:
            raise InvalidParameterError(f"stiffness must be > 0, got {self.stiffness}")
        if not self.k_max > 0.0:
            raise InvalidParameterError(f"k_max must be > 0, got {self.k_max}")
        if c.size and (np.any(c < 0.0) or np.any(c > 1.0)):
            raise InvalidParameterError("c-vector components must lie in [0, 1]")
        if c.size and np.any(np.abs(c.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidParameterError("c-vector components must sum to 1")
        c.flags.writeable = False
        object.__setattr__(self, "c_vectors", c)
        object.__setattr__(self, "stiffness", float(self.stiffness))
        object.__setattr__(self, "k_max", float(self.k_max))

    @classmethod
    def from_contacts(cls, contacts: ContactSet, k_max: float) -> "ScalingProblem":
        squares = contacts.normals ** 2
        if len(contacts):
            squares = squares / squares.sum(axis=1, keepdims=True)
        return cls(squares, contacts.stiffness, k_max)

    @property
    def n(self) -> int:
        return self.c_vectors.shape[0]

    @property
    def ratio(self) -> float:
        """Normalized axis budget K_max / K"""
        return self.k_max / self.stiffness

    def constraints(self) -> Tuple[np.ndarray, np.ndarray]:
        """Stacked G s <= h: 3 axis rows, then -s_i <= 0, then s_i <= 1"""
        n = self.n
        G = np.vstack([self.c_vectors.T, -np.eye(n), np.eye(n)])
        h = np.concatenate([np.full(3, self.ratio), np.zeros(n), np.ones(n)])
        return G, h


@dataclass(frozen=True, eq=False)
class ScalingSolution:
    scales: np.ndarray
    objective: float
    active_axes: FrozenSet[int] = frozenset()
    active_bounds: FrozenSet[int] = frozenset()
    iterations: int = 0
    problem: Optional["ScalingProblem"] = field(default=None, repr=False)

    def net_stiffness_diagonal(self, problem: ScalingProblem) -> np.ndarray:
        return problem.stiffness * (self.scales @ problem.c_vectors) if problem.n else np.zeros(3)

    @cached_property
    def kkt_residual(self) -> float:
        """Largest KKT violation of the returned scales, computed on first access"""
        if self.problem is None:
            return 0.0
        return kkt_residual(self.problem, self.scales)


def kkt_residual(problem: ScalingProblem, scales: np.ndarray) -> float:
    """
    Largest KKT violation at `scales`

    Multipliers of the tight constraints come from a non-negative least squares
    fit of the stationarity condition, so the residual is the stationarity
    error plus any primal infeasibility.
    """
    if problem.n == 0:
        return 0.0
    G, h = problem.constraints()
    slack = h - G @ scales
    infeasibility = float(max(0.0, -slack.min()))
    gradient = scales - 1.0
    tight = slack <= 1e-9 * np.maximum(1.0, np.abs(h))
    if not np.any(tight):
        return max(infeasibility, float(np.abs(gradient).max()))
    _, stationarity = nnls(G[tight].T, -gradient)
    return max(infeasibility, float(stationarity))


def _build_solution(problem: ScalingProblem, scales: np.ndarray, iterations: int) -> ScalingSolution:
    scales = np.clip(scales, 0.0, 1.0)
    if problem.n:
        load = scales @ problem.c_vectors
        worst = float(np.max(load / problem.ratio))
        if worst > 1.0:
            # round-off guard so the bound holds exactly
            scales = scales / worst
            load = scales @ problem.c_vectors
        tight_tol = 1e-9 * max(1.0, problem.ratio)
        active_axes = frozenset(int(j) for j in np.flatnonzero(load >= problem.ratio - tight_tol))
    else:
        active_axes = frozenset()
    scales.flags.writeable = False
    return ScalingSolution(
        scales=scales,
        objective=float(np.sum((scales - 1.0) ** 2)),
        active_axes=active_axes,
        active_bounds=frozenset(int(i) for i in np.flatnonzero(scales <= FEASIBILITY_TOL)),
        iterations=iterations,
        problem=problem,
    )


def solve_scaling(problem: ScalingProblem, max_iters: Optional[int] = None) -> ScalingSolution:
    """
    Primal active-set solve of the bounding QP

    Starts from the feasible uniform scale min(1, min_j ratio / sum_i c_ij),
    with an empty working set. Each iteration projects the gradient onto the
    working-set null space; a zero step either certifies optimality (all
    multipliers >= 0) or drops the most negative multiplier, and a non-zero
    step is cut at the first blocking constraint, which joins the working set.

    Raises:
        ScalingSolverError: the iteration limit was hit
    """
    n = problem.n
    if n == 0:
        return ScalingSolution(scales=np.zeros(0), objective=0.0)
    G, h = problem.constraints()
    loads = problem.c_vectors.sum(axis=0)
    with np.errstate(divide="ignore"):
        start = min(1.0, float(np.min(np.where(loads > 0.0, problem.ratio / loads, np.inf))))
    x = np.full(n, start)
    if start >= 1.0:
        return _build_solution(problem, x, 0)

    working: List[int] = []
    limit = max_iters if max_iters is not None else 10 * (3 + 2 * n) + 50
    for iteration in range(1, limit + 1):
        gradient = x - 1.0
        if working:
            Gw = G[working]
            multipliers = np.linalg.solve(Gw @ Gw.T, -Gw @ gradient)
            step = -gradient - Gw.T @ multipliers
        else:
            multipliers = np.zeros(0)
            step = -gradient

        if np.abs(step).max() <= STEP_TOL:
            if multipliers.size == 0 or multipliers.min() >= -MULTIPLIER_TOL:
                logger.debug("scaling QP: n=%d solved in %d iterations, working set %s", n, iteration, working)
                return _build_solution(problem, x, iteration)
            dropped = working.pop(int(np.argmin(multipliers)))
            logger.debug("scaling QP: dropping constraint %d", dropped)
            continue

        rates = G @ step
        entering = rates > STEP_TOL
        entering[working] = False
        alpha, blocking = 1.0, None
        if entering.any():
            rows = np.flatnonzero(entering)
            ratios = np.maximum(0.0, (h[rows] - G[rows] @ x) / rates[rows])
            first = int(np.argmin(ratios))
            if ratios[first] < 1.0:
                alpha, blocking = float(ratios[first]), int(rows[first])
        x = x + alpha * step
        if blocking is not None:
            working.append(blocking)

    raise ScalingSolverError(f"active-set iteration did not terminate within {limit} iterations (n={n})")


def oracle_solve(problem: ScalingProblem) -> ScalingSolution:
    """
    Reference solve by active-set enumeration, for small problems only

    Every subset of axis constraints is combined with every assignment of
    each contact to {free, 0, 1}; the equality-constrained subproblem is a
    projection solved in closed form (minimum-norm least squares), and the
    feasible candidate with the smallest objective is the optimum. All 3^n
    assignments of one axis subset are solved as a single stacked batch.

    Raises:
        OracleSizeError: more than 6 contacts
    """
    n = problem.n
    if n > ORACLE_MAX_CONTACTS:
        raise OracleSizeError(f"oracle enumerates at most {ORACLE_MAX_CONTACTS} contacts, got {n}")
    if n == 0:
        return ScalingSolution(scales=np.zeros(0), objective=0.0)
    A = problem.c_vectors.T
    r = problem.ratio
    states = np.array(list(itertools.product((0, 1, 2), repeat=n)))
    free = (states == 0).astype(float)
    fixed = (states == 2).astype(float)
    candidates = []
    for mask in itertools.product((False, True), repeat=3):
        axes = np.flatnonzero(mask)
        x = fixed + free
        if axes.size:
            A_m = A[axes]
            gram = np.einsum("an,sn,bn->sab", A_m, free, A_m)
            residual = x @ A_m.T - r
            mu = np.einsum("sab,sb->sa", np.linalg.pinv(gram, hermitian=True), residual)
            x = x - free * (mu @ A_m)
            x = x[np.abs(x @ A_m.T - r).max(axis=1) <= 1e-9 * max(1.0, r)]
        candidates.append(x)
    x = np.concatenate(candidates)
    feasible = (np.all((x >= -1e-12) & (x <= 1.0 + 1e-12), axis=1)
                & np.all(x @ A.T <= r + 1e-12 * max(1.0, r), axis=1))
    x = x[feasible]
    # s = 0 is always feasible, so some candidate exists
    best = int(np.argmin(np.sum((x - 1.0) ** 2, axis=1)))
    return _build_solution(problem, x[best], 0)


def apply_scaling(contacts: ContactSet, solution: ScalingSolution) -> ContactSet:
    """Copy of `contacts` with the solution's scale factors written in"""
    if len(solution.scales) != len(contacts):
        raise InvalidParameterError(
            f"solution has {len(solution.scales)} scales for {len(contacts)} contacts")
    return contacts.with_scales(np.clip(solution.scales, 0.0, 1.0))


def resolve_k_max(bound: Optional[StiffnessBound], stiffness: float) -> Optional[float]:
    """K_max from a config block; None when bounding is disabled"""
    if bound is None:
        return None
    return bound.resolve(stiffness)


def scale_contacts(contacts: ContactSet, k_max: float) -> Tuple[ContactSet, ScalingSolution]:
    """solve_scaling + apply_scaling for one contact set"""
    solution = solve_scaling(ScalingProblem.from_contacts(contacts, k_max))
    return apply_scaling(contacts, solution), solution
