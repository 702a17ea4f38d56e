"""Core domain types and evaluation of the allocation objective and fairness gaps.

The model scores a show/withhold decision ``d`` in ``[0, 1]`` for each user.
Showing earns ``alpha * p`` in expectation, withholding earns the group's
opportunity utility ``beta``.  On top of the economic part sits a per-user
interpretative (hermeneutical) cost: a reward ``theta`` scaled by the uptake
probability ``rho`` when the ad is shown and understood, a penalty ``omega``
for failed uptake, and a fixed exclusion penalty ``xi`` when it is withheld.
The combined objective trades the two off with a weight ``gamma``.

All aggregate functions sum in ascending user-index order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GroupLabel",
    "UserRecord",
    "Population",
    "ModelParams",
    "AllocationMode",
    "Allocation",
    "ConstraintSet",
    "DegenerateGroupError",
    "user_utility",
    "user_hermeneutical_cost",
    "economic_utility",
    "hermeneutical_cost",
    "herm_aware_utility",
    "decision_gains",
    "parity_gap",
    "eo_gap",
    "eho_gap",
    "is_hermeneutically_fair",
]


class DegenerateGroupError(ValueError):
    """A group is empty or carries zero weight, so a group ratio is undefined."""


class GroupLabel(enum.Enum):
    A = "A"
    B = "B"


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):  # also rejects NaN
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class UserRecord:
    """One potential ad recipient.

    ``p`` is the probability the user takes the advertiser's desired action
    (e.g. clicks); ``rho`` is the probability the user makes sense of the
    ad's content.
    """

    group: GroupLabel
    p: float
    rho: float

    def __post_init__(self) -> None:
        if not isinstance(self.group, GroupLabel):
            object.__setattr__(self, "group", GroupLabel(self.group))
        object.__setattr__(self, "p", _check_prob("p", self.p))
        object.__setattr__(self, "rho", _check_prob("rho", self.rho))


class Population:
    """An ordered collection of users split into the two protected groups.

    Internally stored as aligned numpy arrays (``groups``, ``p``, ``rho``) so
    that objective and gap evaluations vectorize.  Both groups must be
    non-empty; group ratios are undefined otherwise.
    """

    __slots__ = ("groups", "p", "rho", "mask_a", "mask_b", "n_a", "n_b", "_users")

    def __init__(self, users: Iterable[UserRecord]):
        users = tuple(users)
        groups = np.array([u.group.value for u in users], dtype="U1")
        p = np.array([u.p for u in users], dtype=np.float64)
        rho = np.array([u.rho for u in users], dtype=np.float64)
        self._init_arrays(groups, p, rho)
        self._users = users

    @classmethod
    def from_arrays(
        cls,
        groups: Sequence[str] | np.ndarray,
        p: Sequence[float] | np.ndarray,
        rho: Sequence[float] | np.ndarray,
    ) -> "Population":
        """Build a population directly from aligned arrays of labels, p and rho."""
        self = object.__new__(cls)
        groups = np.asarray(groups, dtype="U1")
        p = np.asarray(p, dtype=np.float64).copy()
        rho = np.asarray(rho, dtype=np.float64).copy()
        if not (np.isfinite(p).all() and (p >= 0).all() and (p <= 1).all()):
            raise ValueError("p values must lie in [0, 1]")
        if not (np.isfinite(rho).all() and (rho >= 0).all() and (rho <= 1).all()):
            raise ValueError("rho values must lie in [0, 1]")
        self._init_arrays(groups, p, rho)
        self._users = None
        return self

    def _init_arrays(self, groups: np.ndarray, p: np.ndarray, rho: np.ndarray) -> None:
        if groups.shape != p.shape or p.shape != rho.shape or groups.ndim != 1:
            raise ValueError("groups, p and rho must be 1-d arrays of equal length")
        known = np.isin(groups, ("A", "B"))
        if not known.all():
            raise ValueError(f"unknown group labels: {set(groups[~known])}")
        mask_a = groups == "A"
        n_a = int(mask_a.sum())
        n_b = int(groups.size - n_a)
        if n_a < 1 or n_b < 1:
            raise DegenerateGroupError("both groups must contain at least one user")
        for arr in (groups, p, rho, mask_a):
            arr.flags.writeable = False
        self.groups = groups
        self.p = p
        self.rho = rho
        self.mask_a = mask_a
        self.mask_b = ~mask_a
        self.mask_b.flags.writeable = False
        self.n_a = n_a
        self.n_b = n_b

    @property
    def size(self) -> int:
        return int(self.groups.size)

    def __len__(self) -> int:
        return self.size

    @property
    def users(self) -> tuple[UserRecord, ...]:
        if self._users is None:
            self._users = tuple(
                UserRecord(GroupLabel(g), float(p), float(r))
                for g, p, r in zip(self.groups, self.p, self.rho)
            )
        return self._users

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Population):
            return NotImplemented
        return (
            np.array_equal(self.groups, other.groups)
            and np.array_equal(self.p, other.p)
            and np.array_equal(self.rho, other.rho)
        )

    def __repr__(self) -> str:
        return f"Population(n_a={self.n_a}, n_b={self.n_b})"


@dataclass(frozen=True)
class ModelParams:
    """Scalar model parameters.

    ``alpha`` is the utility per desired action; ``beta_*`` the per-group
    opportunity utility of withholding; ``theta_*`` the per-group uptake
    reward; ``omega_*`` the per-group failed-uptake penalty; ``xi`` the
    exclusion penalty; ``gamma`` the weight on the interpretative cost.
    """

    alpha: float
    beta_a: float
    beta_b: float
    theta_a: float
    theta_b: float
    omega_a: float
    omega_b: float
    xi: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("alpha", "beta_a", "beta_b", "theta_a", "theta_b",
                     "omega_a", "omega_b", "xi", "gamma"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.alpha <= 0:
            raise ValueError("alpha must be strictly positive")
        for name in ("theta_a", "theta_b", "omega_a", "omega_b", "xi"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("beta_a", "beta_b", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def beta_for(self, group: GroupLabel) -> float:
        return self.beta_a if group is GroupLabel.A else self.beta_b

    def theta_for(self, group: GroupLabel) -> float:
        return self.theta_a if group is GroupLabel.A else self.theta_b

    def omega_for(self, group: GroupLabel) -> float:
        return self.omega_a if group is GroupLabel.A else self.omega_b

    def per_user(self, pop: Population) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Expand (beta, theta, omega) into per-user arrays aligned with ``pop``."""
        beta = np.where(pop.mask_a, self.beta_a, self.beta_b)
        theta = np.where(pop.mask_a, self.theta_a, self.theta_b)
        omega = np.where(pop.mask_a, self.omega_a, self.omega_b)
        return beta, theta, omega


class AllocationMode(enum.Enum):
    BINARY = "binary"
    FRACTIONAL = "fractional"


@dataclass(frozen=True)
class Allocation:
    """Per-user show decisions aligned index-by-index with a population.

    Binary allocations carry decisions in {0, 1}; fractional allocations carry
    show probabilities in [0, 1] (a randomized policy).
    """

    values: np.ndarray
    mode: AllocationMode

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).copy()
        if values.ndim != 1:
            raise ValueError("allocation values must form a 1-d vector")
        if not np.isfinite(values).all():
            raise ValueError("allocation values must be finite")
        if self.mode is AllocationMode.BINARY:
            if not np.isin(values, (0.0, 1.0)).all():
                raise ValueError("binary allocation entries must be exactly 0 or 1")
        else:
            if ((values < 0.0) | (values > 1.0)).any():
                raise ValueError("fractional allocation entries must lie in [0, 1]")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def binary(cls, values: Sequence[float] | np.ndarray) -> "Allocation":
        return cls(np.asarray(values, dtype=np.float64), AllocationMode.BINARY)

    @classmethod
    def fractional(cls, values: Sequence[float] | np.ndarray) -> "Allocation":
        return cls(np.asarray(values, dtype=np.float64), AllocationMode.FRACTIONAL)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class ConstraintSet:
    """Which group-equality constraints an allocation must satisfy.

    ``tolerance`` is the maximum absolute gap accepted as "equal".
    """

    parity_exposure: bool = False
    equality_opportunity: bool = False
    equality_herm_opportunity: bool = False
    tolerance: float = 1e-6

    def __post_init__(self) -> None:
        tol = float(self.tolerance)
        if not (math.isfinite(tol) and tol >= 0.0):
            raise ValueError("tolerance must be finite and non-negative")
        object.__setattr__(self, "tolerance", tol)

    @classmethod
    def none(cls, tolerance: float = 1e-6) -> "ConstraintSet":
        return cls(tolerance=tolerance)

    @classmethod
    def parity(cls, tolerance: float = 1e-6) -> "ConstraintSet":
        return cls(parity_exposure=True, tolerance=tolerance)

    @classmethod
    def opportunity(cls, tolerance: float = 1e-6) -> "ConstraintSet":
        return cls(equality_opportunity=True, tolerance=tolerance)

    @classmethod
    def herm_opportunity(cls, tolerance: float = 1e-6) -> "ConstraintSet":
        return cls(equality_herm_opportunity=True, tolerance=tolerance)

    @classmethod
    def all(cls, tolerance: float = 1e-6) -> "ConstraintSet":
        return cls(True, True, True, tolerance)

    @property
    def active(self) -> tuple[str, ...]:
        names = []
        if self.parity_exposure:
            names.append("parity_exposure")
        if self.equality_opportunity:
            names.append("equality_opportunity")
        if self.equality_herm_opportunity:
            names.append("equality_herm_opportunity")
        return tuple(names)

    @property
    def any_active(self) -> bool:
        return bool(self.active)


def _check_decision(d: float) -> float:
    d = float(d)
    if not (0.0 <= d <= 1.0):
        raise ValueError(f"decision must lie in [0, 1], got {d!r}")
    return d


def user_utility(user: UserRecord, d: float, params: ModelParams) -> float:
    """Economic utility ``alpha * p * d + beta_g * (1 - d)`` for one user."""
    d = _check_decision(d)
    return params.alpha * user.p * d + params.beta_for(user.group) * (1.0 - d)


def user_hermeneutical_cost(user: UserRecord, d: float, params: ModelParams) -> float:
    """Interpretative cost ``[-theta_g * rho + omega_g * (1 - rho)] * d + xi * (1 - d)``.

    Showing the ad earns ``-theta_g * rho`` (uptake reward) plus
    ``omega_g * (1 - rho)`` (failed-uptake penalty); withholding costs the
    flat exclusion penalty ``xi``.
    """
    d = _check_decision(d)
    theta = params.theta_for(user.group)
    omega = params.omega_for(user.group)
    return (-theta * user.rho + omega * (1.0 - user.rho)) * d + params.xi * (1.0 - d)


def _check_aligned(pop: Population, alloc: Allocation) -> np.ndarray:
    if len(alloc) != pop.size:
        raise ValueError(
            f"allocation length {len(alloc)} does not match population size {pop.size}"
        )
    return alloc.values


def economic_utility(pop: Population, alloc: Allocation, params: ModelParams) -> float:
    """Sum of per-user economic utilities, in ascending user-index order."""
    d = _check_aligned(pop, alloc)
    beta, _, _ = params.per_user(pop)
    return float(np.sum(params.alpha * pop.p * d + beta * (1.0 - d)))


def hermeneutical_cost(pop: Population, alloc: Allocation, params: ModelParams) -> float:
    """Sum of per-user interpretative costs, in ascending user-index order."""
    d = _check_aligned(pop, alloc)
    _, theta, omega = params.per_user(pop)
    return float(
        np.sum((-theta * pop.rho + omega * (1.0 - pop.rho)) * d + params.xi * (1.0 - d))
    )


def herm_aware_utility(pop: Population, alloc: Allocation, params: ModelParams) -> float:
    """Combined objective: economic utility minus ``gamma`` times the cost sum.

    With ``gamma == 0`` this equals :func:`economic_utility` bit for bit (same
    summation order, and subtracting ``0.0 * cost`` is exact).
    """
    return economic_utility(pop, alloc, params) - params.gamma * hermeneutical_cost(
        pop, alloc, params
    )


def decision_gains(pop: Population, params: ModelParams) -> np.ndarray:
    """Per-user objective difference between showing and withholding.

    ``gain_x = alpha * p - beta_g + gamma * (theta_g * rho - omega_g * (1 - rho) + xi)``.
    The combined objective is ``sum(gain * d)`` plus a decision-independent
    constant, so the unconstrained optimum shows exactly the users with
    non-negative gain.
    """
    beta, theta, omega = params.per_user(pop)
    return params.alpha * pop.p - beta + params.gamma * (
        theta * pop.rho - omega * (1.0 - pop.rho) + params.xi
    )


def parity_gap(pop: Population, alloc: Allocation) -> float:
    """Difference in group-average exposure, group B minus group A.

    Positive values mean group B receives the ad at a higher rate than
    group A.
    """
    d = _check_aligned(pop, alloc)
    share_b = float(np.sum(d[pop.mask_b])) / pop.n_b
    share_a = float(np.sum(d[pop.mask_a])) / pop.n_a
    return share_b - share_a


def _weighted_gap(pop: Population, d: np.ndarray, w: np.ndarray, name: str) -> float:
    wa = w[pop.mask_a]
    wb = w[pop.mask_b]
    mass_a = float(np.sum(wa))
    mass_b = float(np.sum(wb))
    if mass_a <= 0.0 or mass_b <= 0.0:
        raise DegenerateGroupError(f"a group has zero total {name}; ratio undefined")
    share_b = float(np.sum(d[pop.mask_b] * wb)) / mass_b
    share_a = float(np.sum(d[pop.mask_a] * wa)) / mass_a
    return share_b - share_a


def eo_gap(pop: Population, alloc: Allocation) -> float:
    """Difference in click-weighted exposure shares, group B minus group A.

    Each group's share is ``sum(d * p) / sum(p)`` over its members.
    """
    d = _check_aligned(pop, alloc)
    return _weighted_gap(pop, d, pop.p, "click probability")


def eho_gap(pop: Population, alloc: Allocation) -> float:
    """Difference in uptake-weighted exposure shares, group B minus group A.

    Same ratio form as :func:`eo_gap` with ``rho`` in place of ``p``.
    """
    d = _check_aligned(pop, alloc)
    return _weighted_gap(pop, d, pop.rho, "uptake probability")


def is_hermeneutically_fair(pop: Population, alloc: Allocation, tol: float) -> bool:
    """True iff both the exposure gap and the uptake-weighted gap are within ``tol``."""
    tol = float(tol)
    if not (math.isfinite(tol) and tol >= 0.0):
        raise ValueError("tol must be finite and non-negative")
    return abs(parity_gap(pop, alloc)) <= tol and abs(eho_gap(pop, alloc)) <= tol
