"""Optimal allocation: closed-form threshold rule, constrained LP, binary oracle.

The unconstrained problem decomposes per user, so the optimum is a threshold
on the click probability.  Constrained problems maximize the same linear
objective over the box ``[0, 1]^n`` subject to each active group-gap being
zero up to the request tolerance ``eps`` (``|gap| <= eps``).  Two engines are
used behind one contract:

* a single active constraint is solved exactly by a parametric search over
  the one Lagrange multiplier (breakpoint scan, O(n log n));
* two or three active constraints go to scipy's HiGHS dual simplex.

Both return vertex solutions: at most one strictly fractional coordinate per
active constraint.  An exhaustive enumeration oracle over binary vectors is
provided for verification on small instances.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .model import (
    Allocation,
    AllocationMode,
    ConstraintSet,
    DegenerateGroupError,
    ModelParams,
    Population,
    decision_gains,
    eho_gap,
    eo_gap,
    herm_aware_utility,
    parity_gap,
)

__all__ = [
    "SolveMode",
    "SolveStatus",
    "SolveRequest",
    "SolveResult",
    "RoundingStrategy",
    "PopulationTooLargeError",
    "NoFeasibleBinaryError",
    "SolverNumericalError",
    "constraint_rows",
    "threshold_rule",
    "solve",
    "solve_unconstrained",
    "solve_constrained_lp",
    "solve_binary_exact",
    "round_allocation",
]

# Realized gaps may exceed the request tolerance by at most this much before
# the solve is considered a numerical failure.
RESIDUAL_BOUND = 1e-8

# Coordinates within this distance of 0 or 1 are snapped to the bound; the
# remainder count as strictly fractional.
SNAP_EPS = 1e-9

_DEDUP_EPS = 1e-12


class PopulationTooLargeError(ValueError):
    """The population exceeds the exhaustive-enumeration cap."""


class NoFeasibleBinaryError(RuntimeError):
    """No binary vector satisfies every active constraint at the tolerance."""


class SolverNumericalError(RuntimeError):
    """The solver failed or its solution violates the residual bound."""


class SolveMode(enum.Enum):
    FRACTIONAL = "fractional"
    BINARY_EXACT = "binary_exact"


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TOLERANCE_RELAXED = "tolerance_relaxed"


class RoundingStrategy(enum.Enum):
    FLOOR = "floor"
    CEIL = "ceil"
    BERNOULLI_SEEDED = "bernoulli"


@dataclass(frozen=True)
class SolveRequest:
    population: Population
    params: ModelParams
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    mode: SolveMode = SolveMode.FRACTIONAL
    enumeration_cap: int = 22


@dataclass(frozen=True)
class SolveResult:
    allocation: Allocation
    objective: float
    parity_gap: float
    eo_gap: float
    eho_gap: float
    status: SolveStatus
    n_fractional: int

    @property
    def gaps(self) -> tuple[float, float, float]:
        return (self.parity_gap, self.eo_gap, self.eho_gap)


def constraint_rows(
    pop: Population, constraints: ConstraintSet
) -> tuple[list[str], np.ndarray]:
    """Linear rows whose dot product with a decision vector is the named gap.

    Rows are oriented group B minus group A, matching the gap functions.
    Rows numerically identical to an earlier row (for example the
    uptake-weighted row when every user shares one uptake value, which then
    collapses onto the exposure row) are dropped.

    Returns:
        (names, matrix) where matrix has one row per retained constraint.
    """
    rows: list[np.ndarray] = []
    names: list[str] = []

    def add(name: str, weights: np.ndarray | None) -> None:
        if weights is None:  # plain exposure counts
            row = np.where(pop.mask_a, -1.0 / pop.n_a, 1.0 / pop.n_b)
        else:
            mass_a = float(np.sum(weights[pop.mask_a]))
            mass_b = float(np.sum(weights[pop.mask_b]))
            if mass_a <= 0.0 or mass_b <= 0.0:
                raise DegenerateGroupError(
                    f"constraint {name} undefined: a group has zero total weight"
                )
            row = np.where(pop.mask_a, -weights / mass_a, weights / mass_b)
        for kept in rows:
            if np.max(np.abs(kept - row)) <= _DEDUP_EPS:
                return
        rows.append(row)
        names.append(name)

    if constraints.parity_exposure:
        add("parity_exposure", None)
    if constraints.equality_opportunity:
        add("equality_opportunity", pop.p)
    if constraints.equality_herm_opportunity:
        add("equality_herm_opportunity", pop.rho)
    matrix = np.vstack(rows) if rows else np.empty((0, pop.size))
    return names, matrix


def threshold_rule(pop: Population, params: ModelParams) -> Allocation:
    """Unconstrained optimum: show iff the click probability clears a threshold.

    ``d_x = 1  iff  p_x >= (beta_g - gamma*xi + gamma*omega_g*(1-rho_x)
    - gamma*theta_g*rho_x) / alpha``; equality shows the ad.
    """
    beta, theta, omega = params.per_user(pop)
    thr = (
        beta
        - params.gamma * params.xi
        + params.gamma * omega * (1.0 - pop.rho)
        - params.gamma * theta * pop.rho
    ) / params.alpha
    return Allocation.binary((pop.p >= thr).astype(np.float64))


def _gap_or_nan(fn, pop: Population, alloc: Allocation) -> float:
    try:
        return fn(pop, alloc)
    except DegenerateGroupError:
        return math.nan


def _build_result(
    pop: Population,
    params: ModelParams,
    values: np.ndarray,
    constraints: ConstraintSet,
    mode: AllocationMode,
) -> SolveResult:
    n_frac = int(np.sum((values > SNAP_EPS) & (values < 1.0 - SNAP_EPS)))
    alloc = Allocation(values, mode)
    result_gaps = {
        "parity_exposure": _gap_or_nan(parity_gap, pop, alloc),
        "equality_opportunity": _gap_or_nan(eo_gap, pop, alloc),
        "equality_herm_opportunity": _gap_or_nan(eho_gap, pop, alloc),
    }
    worst = 0.0
    for name in constraints.active:
        worst = max(worst, abs(result_gaps[name]))
    if worst > constraints.tolerance + RESIDUAL_BOUND:
        raise SolverNumericalError(
            f"solution violates active constraints by {worst:.3e} "
            f"(tolerance {constraints.tolerance:.3e} + residual bound {RESIDUAL_BOUND:.0e})"
        )
    status = (
        SolveStatus.OPTIMAL if worst <= constraints.tolerance else SolveStatus.TOLERANCE_RELAXED
    )
    return SolveResult(
        allocation=alloc,
        objective=herm_aware_utility(pop, alloc, params),
        parity_gap=result_gaps["parity_exposure"],
        eo_gap=result_gaps["equality_opportunity"],
        eho_gap=result_gaps["equality_herm_opportunity"],
        status=status,
        n_fractional=n_frac,
    )


def solve_unconstrained(req: SolveRequest) -> SolveResult:
    """Closed-form optimum via the threshold rule; no constraints allowed."""
    if req.constraints.any_active:
        raise ValueError("solve_unconstrained requires an empty constraint set")
    alloc = threshold_rule(req.population, req.params)
    return _build_result(
        req.population, req.params, np.asarray(alloc.values), req.constraints,
        AllocationMode.BINARY,
    )


def _snap(values: np.ndarray) -> np.ndarray:
    values = np.clip(values, 0.0, 1.0)
    values[values < SNAP_EPS] = 0.0
    values[values > 1.0 - SNAP_EPS] = 1.0
    return values


def _solve_slab_single(c: np.ndarray, a: np.ndarray, eps: float) -> np.ndarray:
    """Maximize ``c . d`` over ``0 <= d <= 1`` with ``|a . d| <= eps``, exactly.

    The value of the equality-constrained problem is concave in the
    right-hand side, so the slab optimum sits at the unconstrained optimum if
    that is feasible and otherwise on the nearer slab face.  The face problem
    is solved by scanning the breakpoints ``c_i / a_i`` of the one-multiplier
    Lagrangian; at most one coordinate ends up strictly fractional.
    """
    d = np.where(c >= 0.0, 1.0, 0.0)  # ties show the ad, matching the threshold rule
    g = float(a @ d)
    if abs(g) <= eps:
        return d
    b = eps if g > 0.0 else -eps

    active = a != 0.0
    ai = a[active]
    lam = c[active] / ai
    order = np.argsort(lam, kind="stable")
    lam_s = lam[order]
    a_s = ai[order]
    pos = np.where(a_s > 0.0, a_s, 0.0)
    neg = np.where(a_s < 0.0, a_s, 0.0)
    # Plateau value of a.d for multipliers between breakpoints k and k+1:
    # positive-a coordinates with larger breakpoints stay on, negative-a
    # coordinates with smaller-or-equal breakpoints have switched on.
    suffix_pos = np.concatenate([np.cumsum(pos[::-1])[::-1], [0.0]])
    prefix_neg = np.cumsum(neg)
    g_plateau = suffix_pos[1:] + prefix_neg
    if b > suffix_pos[0] + 1e-15:
        raise SolverNumericalError("constraint face lies outside the achievable range")
    k = int(np.searchsorted(-g_plateau, -b, side="left"))
    if k >= lam_s.size:
        raise SolverNumericalError("no multiplier breakpoint attains the constraint face")
    lam_hat = lam_s[k]

    marginal = lam_s == lam_hat
    on = ((a_s > 0.0) & (lam_s > lam_hat)) | ((a_s < 0.0) & (lam_s < lam_hat))
    dd = np.zeros(lam_s.size)
    dd[on] = 1.0
    delta = b - float(a_s @ dd)
    # Marginal coordinates have zero reduced cost; fill them in index order
    # until the face is met.  At most one receives a fractional value.
    for j in np.nonzero(marginal)[0]:
        if delta == 0.0:
            break
        step = delta / a_s[j]
        if step > 0.0:
            take = min(step, 1.0)
            dd[j] = take
            delta -= take * a_s[j]

    out = np.where(c >= 0.0, 1.0, 0.0)  # zero-coefficient coordinates stay unconstrained
    idx = np.nonzero(active)[0]
    out[idx[order]] = dd
    return out


def _solve_slab_highs(c: np.ndarray, rows: np.ndarray, eps: float) -> np.ndarray:
    options = {
        "primal_feasibility_tolerance": 1e-9,
        "dual_feasibility_tolerance": 1e-9,
    }
    # Normalize each row to unit max coefficient (gap rows carry ~1/N scale
    # entries); the solver's feasibility tolerance then binds at ~1e-9/scale
    # in gap units, well inside the residual bound.
    scale = 1.0 / np.max(np.abs(rows), axis=1)
    rows = rows * scale[:, None]
    if eps > 0.0:
        res = linprog(
            -c,
            A_ub=np.vstack([rows, -rows]),
            b_ub=np.concatenate([scale * eps, scale * eps]),
            bounds=(0.0, 1.0),
            method="highs-ds",
            options=options,
        )
    else:
        res = linprog(
            -c,
            A_eq=rows,
            b_eq=np.zeros(rows.shape[0]),
            bounds=(0.0, 1.0),
            method="highs-ds",
            options=options,
        )
    if res.status == 2:
        # d = 0 satisfies every gap exactly, so this cannot legitimately happen.
        raise SolverNumericalError("LP reported infeasible on a problem with feasible d=0")
    if res.status != 0 or res.x is None:
        raise SolverNumericalError(f"LP solver failed: status={res.status} ({res.message})")
    return np.asarray(res.x, dtype=np.float64)


def solve_constrained_lp(req: SolveRequest, method: str = "auto") -> SolveResult:
    """Maximize the combined objective under the active group-equality constraints.

    Constraints are enforced as ``|gap| <= tolerance`` over fractional
    decisions in ``[0, 1]``, which also makes every tolerance-feasible binary
    vector feasible here (so this solve dominates the enumeration oracle).

    Args:
        req: request with ``mode=FRACTIONAL`` and at least one active constraint.
        method: "auto" (parametric when one row remains, HiGHS otherwise),
            "parametric", or "highs".

    Raises:
        SolverNumericalError: solver failure or residual above the bound.
    """
    if req.mode is not SolveMode.FRACTIONAL:
        raise ValueError("solve_constrained_lp requires mode=FRACTIONAL")
    if not req.constraints.any_active:
        raise ValueError("solve_constrained_lp requires at least one active constraint")
    pop, params = req.population, req.params
    _, rows = constraint_rows(pop, req.constraints)
    c = decision_gains(pop, params)
    eps = req.constraints.tolerance

    if method == "auto":
        method = "parametric" if rows.shape[0] == 1 else "highs"
    if method == "parametric":
        if rows.shape[0] != 1:
            raise ValueError("parametric method handles exactly one retained constraint row")
        values = _solve_slab_single(c, rows[0], eps)
    elif method == "highs":
        values = _solve_slab_highs(c, rows, eps)
    else:
        raise ValueError(f"unknown method {method!r}")

    return _build_result(pop, params, _snap(values), req.constraints, AllocationMode.FRACTIONAL)


_CHUNK_BITS = 16


def solve_binary_exact(req: SolveRequest) -> SolveResult:
    """Exhaustive search over binary vectors; the verification oracle.

    Feasibility means every active gap is within the request tolerance in
    absolute value.  Ties on the objective break toward the lexicographically
    smallest decision vector.

    Raises:
        PopulationTooLargeError: population exceeds ``enumeration_cap``.
        NoFeasibleBinaryError: the tolerance excludes every binary vector.
    """
    pop, params = req.population, req.params
    n = pop.size
    if n > req.enumeration_cap:
        raise PopulationTooLargeError(
            f"population size {n} exceeds the enumeration cap {req.enumeration_cap}"
        )
    c = decision_gains(pop, params)
    _, rows = constraint_rows(pop, req.constraints)
    tol = req.constraints.tolerance

    # Bit (n-1-i) encodes user i, so ascending mask order is lexicographic
    # order on decision vectors.
    shifts = (n - 1 - np.arange(n)).astype(np.uint64)
    best_obj = -np.inf
    best_mask = -1
    total = 1 << n
    step = 1 << min(_CHUNK_BITS, n)
    for start in range(0, total, step):
        masks = np.arange(start, min(start + step, total), dtype=np.uint64)
        d = ((masks[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.float64)
        obj = d @ c
        if rows.shape[0]:
            feasible = (np.abs(d @ rows.T) <= tol).all(axis=1)
            if not feasible.any():
                continue
            obj = np.where(feasible, obj, -np.inf)
        idx = int(np.argmax(obj))  # first maximum: smallest mask in the chunk
        if obj[idx] > best_obj:
            best_obj = float(obj[idx])
            best_mask = start + idx
    if best_mask < 0:
        raise NoFeasibleBinaryError(
            f"no binary vector satisfies the active constraints at tolerance {tol}"
        )
    values = ((best_mask >> shifts) & np.uint64(1)).astype(np.float64)
    return _build_result(pop, params, values, req.constraints, AllocationMode.BINARY)


def solve(req: SolveRequest) -> SolveResult:
    """Dispatch on request mode and constraint activity."""
    if req.mode is SolveMode.BINARY_EXACT:
        return solve_binary_exact(req)
    if req.constraints.any_active:
        return solve_constrained_lp(req)
    return solve_unconstrained(req)


def round_allocation(
    alloc: Allocation, strategy: RoundingStrategy, seed: int | None = None
) -> Allocation:
    """Realize a fractional allocation as a binary one.

    ``BERNOULLI_SEEDED`` draws each coordinate independently with its
    fractional value as the show probability, so expected gaps equal the
    fractional gaps; the stream is fixed by ``seed``.  Integral inputs pass
    through unchanged under every strategy.
    """
    values = np.asarray(alloc.values)
    if strategy is RoundingStrategy.FLOOR:
        out = np.floor(values)
    elif strategy is RoundingStrategy.CEIL:
        out = np.ceil(values)
    elif strategy is RoundingStrategy.BERNOULLI_SEEDED:
        if seed is None:
            raise ValueError("BERNOULLI_SEEDED requires a seed")
        draws = np.random.default_rng(seed).random(values.size)
        out = (draws < values).astype(np.float64)
    else:
        raise ValueError(f"unknown rounding strategy {strategy!r}")
    return Allocation.binary(out)
