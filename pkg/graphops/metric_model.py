# metric_model.py
"""
Rozkłady wejść/wyjść operatora, dokładna odległość Lévy'ego-Prochorowa
między miarami empirycznymi, profile i estymator d_M.

D(ε) = max_U max(μ(U) - ν(U^ε), ν(U) - μ(U^ε)) liczony jest jako niedobór
przepływu w grafie dwudzielnym krawędzi o długości <= ε; d_LP = inf{ε : D(ε) <= ε}.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching, maximum_flow
from scipy.spatial.distance import cdist

from config import BRUTEFORCE_MAX_ATOMS, TIE_TOLERANCE
from models import (
    ESTIMATOR_CROSS,
    ESTIMATOR_PAIRED,
    DistanceReport,
    DistanceRow,
    DomainError,
    HausdorffEstimate,
    PairingError,
    PreconditionError,
    ProfileSampleConfig,
    SerializationError,
)
from operator_model import POperator
from signal_model import (
    AnySignal,
    Signal,
    _evaluate_raw,
    ground_grid,
    lipschitz_schedule,
    restrict,
    sample_lipschitz_tuple,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

INT32_MAX = int(np.iinfo(np.int32).max)


# ---------- Miara empiryczna ----------

@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Jednostajnie ważone atomy w R^dim."""
    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise PreconditionError(f"measure needs at least one atom, got shape {atoms.shape}")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def merged(self) -> Tuple[np.ndarray, np.ndarray]:
        """Różne atomy i ich krotności."""
        points, counts = np.unique(self.atoms, axis=0, return_counts=True)
        return points, counts.astype(np.int64)


def measure_to_csv(mu: EmpiricalMeasure) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(mu.dim)])
    for row in mu.atoms:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def measure_from_csv(text: str) -> EmpiricalMeasure:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise SerializationError("measure CSV needs a header and at least one atom")
    try:
        atoms = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as e:
        raise SerializationError(f"malformed measure CSV: {e}") from e
    if atoms.ndim != 2 or atoms.shape[1] != len(rows[0]):
        raise SerializationError("measure CSV rows do not match the header width")
    return EmpiricalMeasure(atoms)


# ---------- Rozkład wejść i wyjść ----------

def _on_domain(A: POperator, F: Sequence[AnySignal]) -> None:
    for f in F:
        A.check_domain(f)


def entry_distribution(A: POperator, F: Sequence[AnySignal], Q: int = 512) -> EmpiricalMeasure:
    """
    Atomy (f_1,...,f_k, Af_1,...,Af_k) w Q punktach środkowych (operator ciągły)
    albo w n punktach siatki (operator na F_n).
    """
    if not F:
        raise PreconditionError("entry distribution needs at least one signal")
    _on_domain(A, F)
    images = [A.apply(f) for f in F]
    if A.domain is None:
        xs = ground_grid(Q)
        cols = [_evaluate_raw(f, xs) for f in F] + [_evaluate_raw(g, xs) for g in images]
    else:
        cols = [np.asarray(f.values) for f in F] + [np.asarray(g.values) for g in images]
    return EmpiricalMeasure(np.column_stack(cols))


# ---------- Odległość Lévy'ego-Prochorowa ----------

class _FlowProblem:
    """Sieć źródło -> atomy μ -> atomy ν -> ujście z całkowitymi pojemnościami."""

    def __init__(self, mu: EmpiricalMeasure, nu: EmpiricalMeasure, tol: float):
        if mu.dim != nu.dim:
            raise DomainError(f"measures live in different dimensions: {mu.dim} vs {nu.dim}")
        self.left, left_counts = mu.merged()
        self.right, right_counts = nu.merged()
        total = math.lcm(mu.size, nu.size)
        left_cap = left_counts * (total // mu.size)
        right_cap = right_counts * (total // nu.size)
        # wspólny dzielnik pojemności nie zmienia niedoboru względnego
        unit = math.gcd(total, *left_cap.tolist(), *right_cap.tolist())
        self.total = total // unit
        if self.total > INT32_MAX:
            raise PreconditionError(
                f"measures with {mu.size} and {nu.size} atoms need total capacity {self.total}, "
                f"above the int32 limit {INT32_MAX} of the flow solver"
            )
        self.left_cap = left_cap // unit
        self.right_cap = right_cap // unit
        self.dist = cdist(self.left, self.right)
        self.tol = tol
        self._memo = {}

    def thresholds(self, cap: Optional[float] = None) -> np.ndarray:
        d = self.dist.reshape(-1)
        if cap is not None:
            d = d[d < cap]
        extra = [0.0] if cap is None else [0.0, cap]
        return np.unique(np.concatenate((d, extra)))

    def adjacency(self, t: float) -> np.ndarray:
        return self.dist <= t + self.tol

    def deficiency_units(self, t: float) -> int:
        """total - maksymalny przepływ przy krawędziach długości <= t."""
        if t in self._memo:
            return self._memo[t]
        a, b = self.left.shape[0], self.right.shape[0]
        source, sink = 0, a + b + 1
        rows_l, cols_r = np.nonzero(self.adjacency(t))
        rows = np.concatenate((np.zeros(a, dtype=np.int64), 1 + rows_l, 1 + a + np.arange(b)))
        cols = np.concatenate((1 + np.arange(a), 1 + a + cols_r, np.full(b, sink)))
        caps = np.concatenate((self.left_cap, np.full(rows_l.size, self.total), self.right_cap))
        graph = csr_matrix((caps.astype(np.int32), (rows, cols)), shape=(a + b + 2, a + b + 2))
        flow = int(maximum_flow(graph, source, sink).flow_value)
        value = self.total - flow
        self._memo[t] = value
        return value

    def deficiency(self, t: float) -> float:
        return self.deficiency_units(t) / self.total


def lp_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure, tol: float = TIE_TOLERANCE) -> float:
    """
    Dokładna odległość Lévy'ego-Prochorowa (kule domknięte z tolerancją remisów tol).

    D jest nierosnąca i stała na przedziałach między kolejnymi odległościami atomów,
    więc wystarcza wyszukiwanie binarne pierwszego progu t_i z D(t_i) <= t_i;
    wynik to min(t_i, D(t_{i-1})).
    """
    problem = _FlowProblem(mu, nu, tol)
    # d_LP <= 1 zawsze, progi >= 1 nie mają znaczenia
    t = problem.thresholds(cap=1.0)
    lo, hi = 0, t.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if problem.deficiency(t[mid]) <= t[mid]:
            hi = mid
        else:
            lo = mid + 1
    if lo == 0:
        return 0.0
    result = min(float(t[lo]), problem.deficiency(t[lo - 1]))
    logger.debug("lp_distance: %d vs %d atoms, %d thresholds, result %.6g",
                 mu.size, nu.size, t.size, result)
    return result


def _subset_masks(size: int) -> np.ndarray:
    codes = np.arange(1 << size, dtype=np.int64)
    return ((codes[:, None] >> np.arange(size)) & 1).astype(np.int64)


def _bruteforce_deficiency_units(problem: _FlowProblem, t: float, masks_l, masks_r) -> int:
    adj = problem.adjacency(t).astype(np.int64)
    # μ(U) - ν(U^t) po wszystkich U z nośnika μ, i symetrycznie
    reach_r = (masks_l @ adj) > 0
    forward = masks_l @ problem.left_cap - reach_r.astype(np.int64) @ problem.right_cap
    reach_l = (masks_r @ adj.T) > 0
    backward = masks_r @ problem.right_cap - reach_l.astype(np.int64) @ problem.left_cap
    return int(max(forward.max(), backward.max(), 0))


def lp_distance_bruteforce(mu: EmpiricalMeasure, nu: EmpiricalMeasure, tol: float = TIE_TOLERANCE) -> float:
    """Wyrocznia: pełne wyliczenie podzbiorów nośników i liniowy przegląd przedziałów."""
    if mu.size > BRUTEFORCE_MAX_ATOMS or nu.size > BRUTEFORCE_MAX_ATOMS:
        raise PreconditionError(
            f"bruteforce supports at most {BRUTEFORCE_MAX_ATOMS} atoms per side, got {mu.size}, {nu.size}"
        )
    problem = _FlowProblem(mu, nu, tol)
    masks_l = _subset_masks(problem.left.shape[0])
    masks_r = _subset_masks(problem.right.shape[0])
    t = problem.thresholds()
    best = 1.0
    for i, ti in enumerate(t):
        d = _bruteforce_deficiency_units(problem, ti, masks_l, masks_r) / problem.total
        candidate = max(float(ti), d)
        if i + 1 == t.size or candidate < t[i + 1]:
            best = min(best, candidate)
    return best


def bottleneck_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure, tol: float = TIE_TOLERANCE) -> float:
    """Najmniejsze t, przy którym istnieje doskonałe skojarzenie atomów o długości <= t."""
    if mu.size != nu.size:
        raise PreconditionError(f"bottleneck needs equal atom counts, got {mu.size} and {nu.size}")
    if mu.dim != nu.dim:
        raise DomainError(f"measures live in different dimensions: {mu.dim} vs {nu.dim}")
    dist = cdist(mu.atoms, nu.atoms)
    t = np.unique(dist)

    def perfect(threshold: float) -> bool:
        graph = csr_matrix((dist <= threshold + tol).astype(np.int8))
        match = maximum_bipartite_matching(graph, perm_type="column")
        return bool(np.all(match >= 0))

    lo, hi = 0, t.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if perfect(t[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(t[lo])


# ---------- Profile ----------

def tuple_seed(seed: int, index: int) -> int:
    """Ziarno krotki nr index; niezależne od liczby krotek (ziarna zagnieżdżone)."""
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def _lift(F: Sequence[Signal], A: POperator) -> List[AnySignal]:
    if A.domain is None:
        return list(F)
    return [restrict(f, A.domain) for f in F]


def _test_lipschitz(cfg: ProfileSampleConfig, *ops: POperator) -> float:
    finite = [op.domain for op in ops if op.domain is not None]
    return lipschitz_schedule(cfg.C_v, max(finite) if finite else None, cfg.lipschitz_schedule)


def _continuum_tuple(cfg: ProfileSampleConfig, index: int, C: float) -> List[Signal]:
    return sample_lipschitz_tuple(cfg.k, C, tuple_seed(cfg.seed, index), cfg.family)


def _parallel_map(fn: Callable[[int], T], count: int, threads: int) -> List[T]:
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def sample_profile(A: POperator, cfg: ProfileSampleConfig, threads: int = 1):
    """Lista (krotka sygnałów, rozkład wejść/wyjść) dla num_tuples losowych krotek."""
    C = _test_lipschitz(cfg, A)

    def one(i: int):
        F = _lift(_continuum_tuple(cfg, i, C), A)
        return F, entry_distribution(A, F, cfg.Q)

    return _parallel_map(one, cfg.num_tuples, threads)


def _pairable(A: POperator, B: POperator) -> bool:
    return A is B or A.root_key == B.root_key


def hausdorff_profile_distance(
    A: POperator, B: POperator, cfg: ProfileSampleConfig, threads: int = 1
) -> HausdorffEstimate:
    """
    Estymata odległości Hausdorffa między profilami.

    paired: max po krotkach F z d_LP(D_A(F), D_B(F')), F' to restrykcja F do dziedziny B;
    cross: max(max_i min_j, max_j min_i) po macierzy odległości między próbkami.
    """
    C = _test_lipschitz(cfg, A, B)

    if cfg.estimator == ESTIMATOR_PAIRED:
        if not _pairable(A, B):
            raise PairingError(f"{A.name} and {B.name} do not share a continuum ancestor")

        def paired(i: int) -> float:
            if A is B:
                return 0.0
            F = _continuum_tuple(cfg, i, C)
            mu = entry_distribution(A, _lift(F, A), cfg.Q)
            return lp_distance(mu, entry_distribution(B, _lift(F, B), cfg.Q))

        values = _parallel_map(paired, cfg.num_tuples, threads)
        return HausdorffEstimate(float(max(values)), cfg.num_tuples, ESTIMATOR_PAIRED)

    tuples = [_continuum_tuple(cfg, i, C) for i in range(cfg.num_tuples)]
    side_a = [entry_distribution(A, _lift(F, A), cfg.Q) for F in tuples]
    side_b = [entry_distribution(B, _lift(F, B), cfg.Q) for F in tuples]

    def row(i: int) -> List[float]:
        return [lp_distance(side_a[i], mu_b) for mu_b in side_b]

    D = np.array(_parallel_map(row, cfg.num_tuples, threads))
    value = max(float(D.min(axis=1).max()), float(D.min(axis=0).max()))
    return HausdorffEstimate(value, cfg.num_tuples, ESTIMATOR_CROSS)


def dm_estimate(
    A: POperator, B: POperator, k_max: int, cfg: ProfileSampleConfig, threads: int = 1
) -> DistanceReport:
    """
    Σ_{k=1}^{k_max} 2^-k d_H(k) z ograniczeniem ogona 2^-k_max (d_LP <= 1).
    """
    if k_max < 1:
        raise PreconditionError(f"k_max must be >= 1, got {k_max}")
    rows, total = [], 0.0
    for k in range(1, k_max + 1):
        est = hausdorff_profile_distance(A, B, replace(cfg, k=k), threads)
        rows.append(DistanceRow(k=k, dH_estimate=est.value, num_tuples=est.num_tuples))
        total += 2.0 ** -k * est.value
        logger.debug("dm_estimate %s vs %s: k=%d dH=%.6g", A.name, B.name, k, est.value)
    return DistanceReport(
        per_k=rows,
        total=total,
        remainder_bound=2.0 ** -k_max,
        estimator=cfg.estimator,
        seed=cfg.seed,
    )
