# bounds_model.py
"""
Ograniczenia aproksymacji i przenoszalności w postaci zamkniętej,
falsyfikatory założeń o operatorach oraz przebiegi po rozdzielczościach,
które zestawiają zmierzone odległości z ograniczeniami.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import FD_TOLERANCE, PROBES_PER_CELL, SPREAD_TOLERANCE
from gnn_model import GnnParams, gnn_as_operator, gnn_signal_gap
from metric_model import dm_estimate, tuple_seed
from models import (
    FLAG_CONSTANT_TO_CONSTANT,
    FLAG_CONSTANT_TO_LIPSCHITZ,
    FLAG_LIPSCHITZ_TO_LIPSCHITZ,
    BoundReport,
    CheckReport,
    DomainError,
    HypothesisViolationError,
    PreconditionError,
    ProfileSampleConfig,
)
from operator_model import POperator, discretize
from signal_model import (
    PIECEWISE_CONSTANT,
    FiniteSignal,
    Signal,
    _evaluate_raw,
    l2_norm,
    combine,
    lipschitz_estimate,
    restrict,
    sample_lipschitz_tuple,
)

logger = logging.getLogger(__name__)

THEOREM_APPROXIMATION = "approximation"
THEOREM_TRANSFERABILITY = "transferability"
THEOREM_GNN_APPROXIMATION = "gnn-approximation"
THEOREM_GNN_TRANSFERABILITY = "gnn-transferability"
THEOREM_GENERAL_APPROXIMATION = "general-approximation"
THEOREM_GNN_SIGNAL_GAP = "gnn-signal-gap"

VARIANT_MAIN = "main"
VARIANT_CONSTANT_TO_LIPSCHITZ = "constant-to-lipschitz"
VARIANT_CONSTANT_TO_LIPSCHITZ_WHP = "constant-to-lipschitz-whp"
VARIANT_LIPSCHITZ_TO_LIPSCHITZ = "lipschitz-to-lipschitz"
VARIANT_LIPSCHITZ_TO_LIPSCHITZ_WHP = "lipschitz-to-lipschitz-whp"

MODE_CONSTANT_TO_CONSTANT = FLAG_CONSTANT_TO_CONSTANT
MODE_LIPSCHITZ_TO_LIPSCHITZ = FLAG_LIPSCHITZ_TO_LIPSCHITZ
MODE_CONSTANT_TO_LIPSCHITZ = FLAG_CONSTANT_TO_LIPSCHITZ


# ---------- Wzory ----------

def _require(condition: bool, message: str) -> None:
    if not condition:
        raise PreconditionError(message)


def _check_common(C_A: float, C_v: float, n: int, C_c: float = 0.0) -> None:
    _require(C_A >= 0 and C_v >= 0 and C_c >= 0, f"constants must be nonnegative: C_A={C_A}, C_v={C_v}, C_c={C_c}")
    _require(n >= 1, f"resolution must be >= 1, got {n}")


def approximation_bound(C_A: float, C_v: float, n: int) -> float:
    """2√(C_A C_v / n) + (C_v + 1)/n"""
    _check_common(C_A, C_v, n)
    return 2.0 * math.sqrt(C_A * C_v / n) + (C_v + 1.0) / n


def transferability_bound(C_A: float, C_v: float, m: int, n: int) -> float:
    """(m^-1/2 + n^-1/2)·2√(C_A C_v) + (1/m + 1/n)(C_v + 1)"""
    _check_common(C_A, C_v, n)
    _require(m >= 1, f"resolution must be >= 1, got {m}")
    return (m ** -0.5 + n ** -0.5) * 2.0 * math.sqrt(C_A * C_v) + (1.0 / m + 1.0 / n) * (C_v + 1.0)


def general_approximation_bound(C_A: float, C_v: float, C_c: float, n: int, variant: str) -> float:
    """Ogólne ograniczenie ze stałą 8 dla trzech wariantów założeń."""
    _check_common(C_A, C_v, n, C_c)
    if variant == VARIANT_CONSTANT_TO_LIPSCHITZ:
        return 8.0 * (math.sqrt(C_A * C_v / n) + (C_v + C_c) / n)
    if variant == VARIANT_CONSTANT_TO_LIPSCHITZ_WHP:
        return 8.0 * (math.sqrt((C_A * C_v + 1.0) / n) + (C_v + C_c + 1.0) / n)
    if variant in (VARIANT_LIPSCHITZ_TO_LIPSCHITZ_WHP, VARIANT_LIPSCHITZ_TO_LIPSCHITZ):
        return 8.0 * (math.sqrt((C_A * C_v + 1.0) / n) + (C_v + 1.0) / n)
    raise PreconditionError(f"unknown bound variant {variant!r}")


def gnn_constants(C_A: float, K: int, L: int, n_max: int) -> Tuple[float, float, float]:
    """(C̄_A, P1, P2) = ((n_max Σ_{i=1}^K C_A^i)^L, 3^{KL}, 3^K K^2)."""
    _require(K >= 1 and L >= 1 and n_max >= 1, f"K, L, n_max must be >= 1, got {K}, {L}, {n_max}")
    C_bar = (n_max * sum(C_A ** i for i in range(1, K + 1))) ** L
    return C_bar, 3.0 ** (K * L), 3.0 ** K * K * K


def gnn_approximation_bound(
    C_A: float, C_v: float, K: int, L: int, n_max: int, n: int,
    variant: str = VARIANT_MAIN, C_c: float = 0.0,
) -> float:
    _check_common(C_A, C_v, n, C_c)
    C_bar, P1, P2 = gnn_constants(C_A, K, L, n_max)
    if variant in (VARIANT_MAIN, VARIANT_LIPSCHITZ_TO_LIPSCHITZ, VARIANT_LIPSCHITZ_TO_LIPSCHITZ_WHP):
        return n ** -0.5 * P1 * math.sqrt(C_bar * C_v) + (C_v + 1.0) / n
    if variant == VARIANT_CONSTANT_TO_LIPSCHITZ:
        return n ** -0.5 * P1 * math.sqrt(C_bar * C_v + C_c * n_max * C_A ** K * P2) + C_v / n
    if variant == VARIANT_CONSTANT_TO_LIPSCHITZ_WHP:
        return n ** -0.5 * P1 * math.sqrt(C_bar * C_v + (C_c + 1.0) * n_max * C_A ** K * P2) + (C_v + 1.0) / n
    raise PreconditionError(f"unknown bound variant {variant!r}")


def gnn_transferability_bound(
    C_A: float, C_v: float, K: int, L: int, n_max: int, m: int, n: int,
    variant: str = VARIANT_MAIN, C_c: float = 0.0,
) -> float:
    """Suma ograniczeń aproksymacji przy m i przy n (nierówność trójkąta)."""
    return (gnn_approximation_bound(C_A, C_v, K, L, n_max, m, variant, C_c)
            + gnn_approximation_bound(C_A, C_v, K, L, n_max, n, variant, C_c))


def gnn_signal_gap_bound(
    C_A: float, C_v: float, C_c: float, K: int, L: int, n_max: int, n: int, variant: str
) -> float:
    """n^-1 (3^K K n_max C_A^K)^L max(C_v, 3^K K^2 X n_max C_A^K), X zależne od wariantu."""
    _check_common(C_A, C_v, n, C_c)
    _require(K >= 1 and L >= 1 and n_max >= 1, f"K, L, n_max must be >= 1, got {K}, {L}, {n_max}")
    if variant == VARIANT_CONSTANT_TO_LIPSCHITZ:
        x = C_c
    elif variant == VARIANT_CONSTANT_TO_LIPSCHITZ_WHP:
        x = C_c + 1.0
    elif variant in (VARIANT_LIPSCHITZ_TO_LIPSCHITZ, VARIANT_LIPSCHITZ_TO_LIPSCHITZ_WHP):
        x = C_v + 1.0
    else:
        raise PreconditionError(f"unknown bound variant {variant!r}")
    growth = (3.0 ** K * K * n_max * C_A ** K) ** L
    return growth * max(C_v, 3.0 ** K * K * K * x * n_max * C_A ** K) / n


def select_variant(A: POperator) -> str:
    """Wariant ograniczenia wynikający z flag założeń operatora."""
    if A.constants.has(FLAG_CONSTANT_TO_LIPSCHITZ) or A.constants.has(FLAG_CONSTANT_TO_CONSTANT):
        return VARIANT_CONSTANT_TO_LIPSCHITZ
    if A.constants.has(FLAG_LIPSCHITZ_TO_LIPSCHITZ):
        return VARIANT_LIPSCHITZ_TO_LIPSCHITZ
    return VARIANT_LIPSCHITZ_TO_LIPSCHITZ_WHP


def _C_c(A: POperator) -> float:
    if A.constants.C_c is not None:
        return A.constants.C_c
    return 0.0


def _constants_used(A: POperator, C_v: float, n=None, m=None, params: Optional[GnnParams] = None) -> Dict:
    used = {"C_A": A.constants.C_A, "C_v": C_v, "C_c": _C_c(A), "n": n, "m": m}
    if params is not None:
        used.update({"K": params.K, "L": params.L, "n_max": params.n_max})
    return used


def gnn_signal_gap_report(
    params: GnnParams, A: POperator, n: int, C_v: float = 1.0, variant: Optional[str] = None
) -> BoundReport:
    variant = variant or select_variant(A)
    bound = gnn_signal_gap_bound(
        A.constants.C_A, C_v, _C_c(A), params.K, params.L, params.n_max, n, variant
    )
    return BoundReport(
        theorem=THEOREM_GNN_SIGNAL_GAP,
        variant=variant,
        constants_used=_constants_used(A, C_v, n=n, params=params),
        bound_value=bound,
        n=n,
        hypothesis_violated=_violates(A, (n,)),
    )


# ---------- Falsyfikatory ----------

def _random_signals(A: POperator, rng: np.random.Generator, trial: int, count: int = 2):
    if A.domain is not None:
        return [FiniteSignal(A.domain, rng.uniform(-1.0, 1.0, A.domain)) for _ in range(count)]
    if trial % 2 == 0:
        return sample_lipschitz_tuple(count, float(rng.uniform(1.0, 8.0)), int(rng.integers(0, 2 ** 31)))
    cells = 16
    return [Signal(PIECEWISE_CONSTANT, n=cells, values=rng.uniform(-1.0, 1.0, cells), range_bound=1.0)
            for _ in range(count)]


def check_lipschitz_map(A: POperator, C_A: float, trials: int = 200, seed: int = 0) -> CheckReport:
    """max ‖Af − Ag‖₂ / ‖f − g‖₂ po losowych parach; przejście iff <= C_A·1.01."""
    rng = np.random.default_rng(seed)
    worst, witness = 0.0, None
    for trial in range(trials):
        f, g = _random_signals(A, rng, trial)
        denom = l2_norm(combine([1.0, -1.0], [f, g]))
        if denom == 0.0:
            continue
        ratio = l2_norm(combine([1.0, -1.0], [A.apply(f), A.apply(g)])) / denom
        if ratio > worst:
            worst, witness = ratio, f"random pair #{trial}"
    threshold = C_A * FD_TOLERANCE
    passed = worst <= threshold
    return CheckReport(
        check="lipschitz-map",
        passed=passed,
        measured=float(worst),
        threshold=threshold,
        trials=trials,
        resolution=A.domain,
        witness=None if passed else witness,
    )


def _interior_probes(n: int, per_cell: int) -> np.ndarray:
    offsets = (np.arange(per_cell) + 0.5) / per_cell
    return (np.arange(n)[:, None] + offsets[None, :]) / n


def check_piece_structure(
    A: POperator,
    n: int,
    mode: str,
    C: Optional[float] = None,
    trials: int = 16,
    seed: int = 0,
) -> CheckReport:
    """
    Falsyfikator założeń o kawałkach na rozdzielczości n.

    - constant-to-constant: rozrzut Af wewnątrz komórek dla losowych wejść kawałkami stałych
    - lipschitz-to-lipschitz: stała Lipschitza Af dla losowych wejść C-lipschitzowskich
    - constant-to-lipschitz: stała Lipschitza Af wewnątrz komórek
    """
    if A.domain is not None:
        raise DomainError("piece-structure checks probe continuum operators")
    _require(n >= 1, f"resolution must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    worst, witness = 0.0, None

    if mode == MODE_CONSTANT_TO_CONSTANT:
        probes = _interior_probes(n, PROBES_PER_CELL)
        for trial in range(trials):
            f = Signal(PIECEWISE_CONSTANT, n=n, values=rng.uniform(-1.0, 1.0, n), range_bound=1.0)
            vals = _evaluate_raw(A.apply(f), probes.reshape(-1)).reshape(n, PROBES_PER_CELL)
            spread = np.ptp(vals, axis=1)
            if spread.max() > worst:
                cell = int(np.argmax(spread))
                worst, witness = float(spread.max()), f"trial {trial}, cell {cell + 1}"
        threshold = SPREAD_TOLERANCE

    elif mode == MODE_LIPSCHITZ_TO_LIPSCHITZ:
        declared = 1.0 if C is None else C
        for trial in range(trials):
            f = sample_lipschitz_tuple(1, declared, int(rng.integers(0, 2 ** 31)))[0]
            est = lipschitz_estimate(A.apply(f))
            if est > worst:
                worst, witness = est, f"trial {trial}"
        threshold = declared * FD_TOLERANCE

    elif mode == MODE_CONSTANT_TO_LIPSCHITZ:
        _require(C is not None, "constant-to-lipschitz mode needs a declared constant")
        probes = _interior_probes(n, 64)
        step = 1.0 / (64 * n)
        for trial in range(trials):
            f = Signal(PIECEWISE_CONSTANT, n=n, values=rng.uniform(-1.0, 1.0, n), range_bound=1.0)
            vals = _evaluate_raw(A.apply(f), probes.reshape(-1)).reshape(n, 64)
            slopes = np.abs(np.diff(vals, axis=1)).max(axis=1) / step
            if slopes.max() > worst:
                cell = int(np.argmax(slopes))
                worst, witness = float(slopes.max()), f"trial {trial}, cell {cell + 1}"
        threshold = C * FD_TOLERANCE

    else:
        raise PreconditionError(f"unknown piece-structure mode {mode!r}")

    passed = worst <= threshold
    if not passed:
        logger.debug("Piece-structure check %s failed on %s at n=%d: %.3g", mode, A.name, n, worst)
    return CheckReport(
        check=mode,
        passed=passed,
        measured=float(worst),
        threshold=float(threshold),
        trials=trials,
        resolution=n,
        witness=None if passed else witness,
    )


# ---------- Przebiegi po rozdzielczościach ----------

def _violates(A: POperator, resolutions: Sequence[int]) -> bool:
    if not A.constants.assumption_flags:
        return True
    return any(n not in A.constants.resolution_set for n in resolutions)


def _row_resolutions(resolutions: Sequence[int], theorem: str) -> List[Tuple[int, ...]]:
    if theorem in (THEOREM_TRANSFERABILITY, THEOREM_GNN_TRANSFERABILITY):
        return [(m, n) for m, n in zip(resolutions, resolutions[1:])]
    return [(n,) for n in resolutions]


def run_resolution_sweep(
    A: POperator,
    resolutions: Sequence[int],
    cfg: ProfileSampleConfig,
    theorem: str = THEOREM_APPROXIMATION,
    k_max: int = 4,
    gnn_params: Optional[GnnParams] = None,
    threads: int = 1,
    variant: Optional[str] = None,
    strict: bool = False,
) -> List[BoundReport]:
    """
    Jeden wiersz BoundReport na rozdzielczość (albo na parę kolejnych rozdzielczości
    dla przenoszalności). Wiersze spoza zbioru rozdzielczości operatora są mierzone
    i oznaczane; przy strict zgłaszany jest HypothesisViolationError.
    """
    if A.domain is not None:
        raise DomainError("resolution sweeps start from a continuum operator")
    if theorem in (THEOREM_GNN_APPROXIMATION, THEOREM_GNN_TRANSFERABILITY, THEOREM_GNN_SIGNAL_GAP):
        if gnn_params is None:
            raise PreconditionError(f"theorem {theorem!r} needs GNN parameters")
        gnn_params.validate()

    rows = _row_resolutions(list(resolutions), theorem)
    if strict:
        bad = [r for r in rows if _violates(A, r)]
        if bad:
            raise HypothesisViolationError(
                f"resolutions {bad} fall outside the hypothesis set {A.constants.resolution_set.describe()} of {A.name}"
            )

    inner_threads = 1 if threads > 1 and len(rows) > 1 else threads

    def build(index: int) -> BoundReport:
        res = rows[index]
        report = _sweep_row(A, res, cfg, theorem, k_max, gnn_params, inner_threads, variant)
        logger.debug("Sweep row %s %s: bound=%.6g measured=%s", theorem, res, report.bound_value, report.measured)
        return report

    if threads > 1 and len(rows) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(build, range(len(rows))))
    return [build(i) for i in range(len(rows))]


def _sweep_row(
    A: POperator,
    res: Tuple[int, ...],
    cfg: ProfileSampleConfig,
    theorem: str,
    k_max: int,
    params: Optional[GnnParams],
    threads: int,
    variant: Optional[str],
) -> BoundReport:
    C_A, C_v, C_c = A.constants.C_A, cfg.C_v, _C_c(A)
    violated = _violates(A, res)

    if theorem in (THEOREM_APPROXIMATION, THEOREM_GENERAL_APPROXIMATION):
        (n,) = res
        measured = dm_estimate(A, discretize(A, n), k_max, cfg, threads)
        if theorem == THEOREM_APPROXIMATION and A.constants.assumption_flags:
            label, var, bound = THEOREM_APPROXIMATION, VARIANT_MAIN, approximation_bound(C_A, C_v, n)
        else:
            var = variant or select_variant(A)
            if not A.constants.assumption_flags:
                var = VARIANT_LIPSCHITZ_TO_LIPSCHITZ_WHP
            label, bound = THEOREM_GENERAL_APPROXIMATION, general_approximation_bound(C_A, C_v, C_c, n, var)
        return BoundReport(label, var, _constants_used(A, C_v, n=n), bound, measured=measured.total,
                           n=n, num_tuples=cfg.num_tuples, seed=cfg.seed, hypothesis_violated=violated)

    if theorem == THEOREM_TRANSFERABILITY:
        m, n = res
        measured = dm_estimate(discretize(A, m), discretize(A, n), k_max, cfg, threads)
        bound = transferability_bound(C_A, C_v, m, n)
        return BoundReport(theorem, VARIANT_MAIN, _constants_used(A, C_v, n=n, m=m), bound,
                           measured=measured.total, n=n, m=m, num_tuples=cfg.num_tuples, seed=cfg.seed,
                           hypothesis_violated=violated)

    var = variant or (VARIANT_MAIN if theorem != THEOREM_GNN_SIGNAL_GAP else select_variant(A))

    if theorem == THEOREM_GNN_SIGNAL_GAP:
        (n,) = res
        f = sample_lipschitz_tuple(1, C_v, tuple_seed(cfg.seed, n), cfg.family)[0]
        _, report = gnn_signal_gap(params, A, n, restrict(f, n), C_v, var)
        report.seed = cfg.seed
        return report

    consts = _constants_used(A, C_v, params=params)
    if theorem == THEOREM_GNN_APPROXIMATION:
        (n,) = res
        measured = dm_estimate(gnn_as_operator(params, A), gnn_as_operator(params, discretize(A, n)),
                               k_max, cfg, threads)
        bound = gnn_approximation_bound(C_A, C_v, params.K, params.L, params.n_max, n, var, C_c)
        consts["n"] = n
        return BoundReport(theorem, var, consts, bound, measured=measured.total, n=n,
                           num_tuples=cfg.num_tuples, seed=cfg.seed, hypothesis_violated=violated)

    if theorem == THEOREM_GNN_TRANSFERABILITY:
        m, n = res
        measured = dm_estimate(gnn_as_operator(params, discretize(A, m)),
                               gnn_as_operator(params, discretize(A, n)), k_max, cfg, threads)
        bound = gnn_transferability_bound(C_A, C_v, params.K, params.L, params.n_max, m, n, var, C_c)
        consts.update({"n": n, "m": m})
        return BoundReport(theorem, var, consts, bound, measured=measured.total, n=n, m=m,
                           num_tuples=cfg.num_tuples, seed=cfg.seed, hypothesis_violated=violated)

    raise PreconditionError(f"unknown theorem {theorem!r}")


def evaluate_bound(
    theorem: str,
    C_A: float,
    C_v: float,
    n: int,
    m: Optional[int] = None,
    C_c: float = 0.0,
    K: int = 1,
    L: int = 1,
    n_max: int = 1,
    variant: Optional[str] = None,
) -> float:
    """Wartość wybranego ograniczenia z samych stałych (bez pomiaru)."""
    if theorem == THEOREM_APPROXIMATION:
        return approximation_bound(C_A, C_v, n)
    if theorem == THEOREM_TRANSFERABILITY:
        _require(m is not None, "transferability needs m")
        return transferability_bound(C_A, C_v, m, n)
    if theorem == THEOREM_GENERAL_APPROXIMATION:
        return general_approximation_bound(C_A, C_v, C_c, n, variant or VARIANT_LIPSCHITZ_TO_LIPSCHITZ_WHP)
    if theorem == THEOREM_GNN_APPROXIMATION:
        return gnn_approximation_bound(C_A, C_v, K, L, n_max, n, variant or VARIANT_MAIN, C_c)
    if theorem == THEOREM_GNN_TRANSFERABILITY:
        _require(m is not None, "gnn transferability needs m")
        return gnn_transferability_bound(C_A, C_v, K, L, n_max, m, n, variant or VARIANT_MAIN, C_c)
    if theorem == THEOREM_GNN_SIGNAL_GAP:
        return gnn_signal_gap_bound(C_A, C_v, C_c, K, L, n_max, n, variant or VARIANT_LIPSCHITZ_TO_LIPSCHITZ)
    raise PreconditionError(f"unknown theorem {theorem!r}")
