# models.py
"""
Wspólne struktury danych i wyjątki pakietu.

- OperatorConstants / ResolutionSet: stałe deklarowane przez P-operatory
- ProfileSampleConfig: parametry próbkowania profili (k, C_v, liczba krotek, ...)
- BoundReport / CheckReport / DistanceReport: wiersze raportów
- wyjątki domenowe mapowane w main.py na kody wyjścia
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional


# ---------- Wyjątki ----------

class GraphopError(ValueError):
    """Bazowy wyjątek domenowy."""


class DomainError(GraphopError):
    """Punkt poza [0,1] albo sygnał/operator z innej przestrzeni."""


class ResolutionMismatchError(GraphopError):
    pass


class PreconditionError(GraphopError):
    pass


class SerializationError(GraphopError):
    pass


class PairingError(DomainError):
    """Tryb 'paired' bez wspólnego operatora-przodka."""


class ParameterNormalizationError(GraphopError):
    """Parametry filtra z |h| > 1."""


class HypothesisViolationError(GraphopError):
    pass


# ---------- Stałe operatorów ----------

FLAG_CONSTANT_TO_CONSTANT = "constant-to-constant"
FLAG_LIPSCHITZ_TO_LIPSCHITZ = "lipschitz-to-lipschitz"
FLAG_CONSTANT_TO_LIPSCHITZ = "constant-to-lipschitz"

ASSUMPTION_FLAGS = frozenset(
    {FLAG_CONSTANT_TO_CONSTANT, FLAG_LIPSCHITZ_TO_LIPSCHITZ, FLAG_CONSTANT_TO_LIPSCHITZ}
)


@dataclass(frozen=True)
class ResolutionSet:
    """
    Zbiór rozdzielczości N, na których operator spełnia założenia o kawałkach.

    members=None oznacza wszystkie liczby naturalne dodatnie.
    """
    members: Optional[FrozenSet[int]] = None

    @classmethod
    def all(cls) -> "ResolutionSet":
        return cls(None)

    @classmethod
    def of(cls, values) -> "ResolutionSet":
        return cls(frozenset(int(v) for v in values))

    @property
    def is_all(self) -> bool:
        return self.members is None

    def __contains__(self, n: int) -> bool:
        if self.members is None:
            return n >= 1
        return n in self.members

    def is_empty(self) -> bool:
        return self.members is not None and not self.members

    def intersect(self, other: "ResolutionSet") -> "ResolutionSet":
        if self.members is None:
            return other
        if other.members is None:
            return self
        return ResolutionSet(self.members & other.members)

    def describe(self) -> str:
        if self.members is None:
            return "all"
        return ",".join(str(v) for v in sorted(self.members))


@dataclass(frozen=True)
class OperatorConstants:
    C_A: float
    C_c: Optional[float] = None
    resolution_set: ResolutionSet = field(default_factory=lambda: ResolutionSet.of(()))
    assumption_flags: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if self.C_A < 0:
            raise PreconditionError(f"C_A must be nonnegative, got {self.C_A}")
        unknown = set(self.assumption_flags) - ASSUMPTION_FLAGS
        if unknown:
            raise PreconditionError(f"unknown assumption flags: {sorted(unknown)}")
        if self.assumption_flags and self.resolution_set.is_empty():
            raise PreconditionError("resolution_set must be nonempty when assumption flags are set")

    def has(self, flag: str) -> bool:
        return flag in self.assumption_flags


# ---------- Próbkowanie profili ----------

ESTIMATOR_PAIRED = "paired"
ESTIMATOR_CROSS = "cross"


@dataclass(frozen=True)
class ProfileSampleConfig:
    k: int = 1
    C_v: float = 1.0
    num_tuples: int = 64
    Q: int = 512
    seed: int = 0
    estimator: str = ESTIMATOR_PAIRED
    family: str = "piecewise-linear"
    lipschitz_schedule: str = "fixed"

    def __post_init__(self):
        if self.k < 1 or self.num_tuples < 1 or self.Q < 1:
            raise PreconditionError("k, num_tuples and Q must all be >= 1")
        if self.C_v <= 0:
            raise PreconditionError(f"C_v must be positive, got {self.C_v}")
        if self.estimator not in (ESTIMATOR_PAIRED, ESTIMATOR_CROSS):
            raise PreconditionError(f"unknown estimator {self.estimator!r}")


# ---------- Raporty ----------

@dataclass
class BoundReport:
    theorem: str
    variant: str
    constants_used: Dict[str, float]
    bound_value: float
    measured: Optional[float] = None
    passed: Optional[bool] = None
    n: Optional[int] = None
    m: Optional[int] = None
    num_tuples: Optional[int] = None
    seed: Optional[int] = None
    hypothesis_violated: bool = False

    def __post_init__(self):
        if self.bound_value < 0:
            raise PreconditionError(f"bound must be nonnegative, got {self.bound_value}")
        if self.measured is not None and self.passed is None:
            self.passed = bool(self.measured <= self.bound_value)

    def with_measurement(self, measured: float) -> "BoundReport":
        self.measured = float(measured)
        self.passed = bool(self.measured <= self.bound_value)
        return self


@dataclass
class CheckReport:
    """Wynik falsyfikatora założeń: przejście to dowód poszlakowy, nie twierdzenie."""
    check: str
    passed: bool
    measured: float
    threshold: float
    trials: int
    resolution: Optional[int] = None
    witness: Optional[str] = None


@dataclass
class HausdorffEstimate:
    value: float
    num_tuples: int
    estimator: str


@dataclass
class DistanceRow:
    k: int
    dH_estimate: float
    num_tuples: int


@dataclass
class DistanceReport:
    per_k: List[DistanceRow]
    total: float
    remainder_bound: float
    estimator: str
    seed: int
