# signal_model.py
"""
Sygnały na [0,1] i na siatce [n]/n.

Reprezentacje Signal:
- piecewise-constant(n): wartości na komórkach (u-1/n, u], x=0 należy do komórki 1
- piecewise-linear(n): n+1 wartości w węzłach 0, 1/n, ..., 1
- analytic: dowolna zwektoryzowana funkcja x -> f(x)

Całki ciągłe liczone są regułą punktu środkowego na siatce Q punktów.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from config import (
    BUMP_TABLE_POINTS,
    FD_STEP,
    NOISE_CELLS,
    PL_NODES_PER_UNIT,
    QUADRATURE_POINTS,
)
from models import DomainError, PreconditionError, ResolutionMismatchError, SerializationError

logger = logging.getLogger(__name__)

PIECEWISE_CONSTANT = "piecewise-constant"
PIECEWISE_LINEAR = "piecewise-linear"
ANALYTIC = "analytic"

FAMILY_PIECEWISE_LINEAR = "piecewise-linear"
FAMILY_MOLLIFIED_NOISE = "mollified-noise"

# punkty siatki k/n trafiają do własnej komórki mimo błędu zaokrąglenia x*n
_CELL_SNAP = 1e-9

Evaluator = Callable[[np.ndarray], np.ndarray]


# ---------- Typy ----------

@dataclass(frozen=True, eq=False)
class Signal:
    representation: str
    n: int = 0
    values: Optional[np.ndarray] = None
    evaluator: Optional[Evaluator] = None
    range_bound: float = 0.0
    lipschitz_const: Optional[float] = None

    def __post_init__(self):
        if self.representation in (PIECEWISE_CONSTANT, PIECEWISE_LINEAR):
            expected = self.n if self.representation == PIECEWISE_CONSTANT else self.n + 1
            if self.n < 1 or self.values is None:
                raise PreconditionError(f"{self.representation} signal needs n >= 1 and values")
            vals = np.array(self.values, dtype=float).reshape(-1)
            if vals.size != expected:
                raise PreconditionError(
                    f"{self.representation} signal with n={self.n} needs {expected} values, got {vals.size}"
                )
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)
        elif self.representation == ANALYTIC:
            if self.evaluator is None:
                raise PreconditionError("analytic signal needs an evaluator")
        else:
            raise PreconditionError(f"unknown representation {self.representation!r}")
        if self.range_bound < 0:
            raise PreconditionError("range_bound must be nonnegative")

    @property
    def is_piecewise_constant(self) -> bool:
        return self.representation == PIECEWISE_CONSTANT

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True, eq=False)
class FiniteSignal:
    n: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if self.n < 1 or vals.size != self.n:
            raise PreconditionError(f"finite signal with n={self.n} got {vals.size} values")
        if not np.all(np.isfinite(vals)):
            raise PreconditionError("finite signal values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, values: Sequence[float]) -> "FiniteSignal":
        vals = np.asarray(values, dtype=float).reshape(-1)
        return cls(vals.size, vals)


AnySignal = Union[Signal, FiniteSignal]


# ---------- Siatki ----------

@lru_cache(maxsize=32)
def ground_grid(q: int = QUADRATURE_POINTS) -> np.ndarray:
    """Punkty środkowe (i+1/2)/q, i = 0..q-1 (tylko do odczytu)."""
    grid = (np.arange(q, dtype=float) + 0.5) / q
    grid.setflags(write=False)
    return grid


def cell_index(x: np.ndarray, n: int) -> np.ndarray:
    """Indeks (od 0) komórki (u-1/n, u] zawierającej x; x=0 trafia do komórki 0."""
    idx = np.ceil(np.asarray(x, dtype=float) * n - _CELL_SNAP).astype(np.int64) - 1
    return np.clip(idx, 0, n - 1)


def _cell_midpoints(n: int, per_cell: int) -> np.ndarray:
    offsets = (np.arange(per_cell, dtype=float) + 0.5) / per_cell
    return ((np.arange(n, dtype=float)[:, None] + offsets[None, :]) / n).reshape(-1)


# ---------- Ewaluacja ----------

def _evaluate_raw(f: Signal, x: np.ndarray) -> np.ndarray:
    if f.representation == PIECEWISE_CONSTANT:
        return f.values[cell_index(x, f.n)]
    if f.representation == PIECEWISE_LINEAR:
        return np.interp(x, np.linspace(0.0, 1.0, f.n + 1), f.values)
    return np.asarray(f.evaluator(x), dtype=float)


def evaluate(f: Signal, x):
    """
    Wartość sygnału w punkcie (lub tablicy punktów) z [0,1].

    :param f: sygnał
    :param x: liczba albo tablica punktów
    :return: float dla skalara, tablica dla tablicy
    :raises DomainError: gdy któryś punkt leży poza [0,1]
    """
    arr = np.asarray(x, dtype=float)
    if arr.size and (np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr))):
        raise DomainError(f"signal evaluated outside [0,1]: {arr[(arr < 0) | (arr > 1)][:3]}")
    out = _evaluate_raw(f, arr.reshape(-1)).reshape(arr.shape)
    if arr.ndim == 0:
        return float(out)
    return out


# ---------- Rozszerzenia i restrykcja ----------

def extend_pc(X: FiniteSignal) -> Signal:
    """Rozszerzenie kawałkami stałe X~(u) = X(ceil(un)/n)."""
    return Signal(
        PIECEWISE_CONSTANT,
        n=X.n,
        values=X.values,
        range_bound=float(np.max(np.abs(X.values))),
        lipschitz_const=None,
    )


def extend_pl(X: FiniteSignal, C_v: float) -> Signal:
    """
    Rozszerzenie kawałkami liniowe, stałe na [0, 1/n].

    :param X: sygnał na siatce o przyrostach co najwyżej C_v/n
    :param C_v: stała Lipschitza
    :return: sygnał piecewise-linear przechodzący przez X w punktach siatki
    :raises PreconditionError: gdy przyrost przekracza C_v/n
    """
    steps = np.abs(np.diff(X.values))
    limit = C_v / X.n + 1e-12
    if steps.size and np.max(steps) > limit:
        worst = int(np.argmax(steps))
        raise PreconditionError(
            f"increment {steps[worst]:.6g} at cell {worst + 1} exceeds C_v/n = {C_v / X.n:.6g}"
        )
    nodes = np.concatenate(([X.values[0]], X.values))
    lip = float(X.n * np.max(np.abs(np.diff(nodes))))
    return Signal(
        PIECEWISE_LINEAR,
        n=X.n,
        values=nodes,
        range_bound=float(np.max(np.abs(X.values))),
        lipschitz_const=lip,
    )


def restrict(f: Signal, n: int, quadrature: int = QUADRATURE_POINTS) -> FiniteSignal:
    """
    Średnie komórkowe n*∫_{u-1/n}^{u} f.

    Dla sygnałów kawałkami stałych o zgodnej rozdzielczości wynik jest dokładny.
    """
    if n < 1:
        raise PreconditionError(f"resolution must be >= 1, got {n}")
    if f.representation == PIECEWISE_CONSTANT:
        r = f.n
        if r == n:
            return FiniteSignal(n, f.values)
        if r % n == 0:
            return FiniteSignal(n, f.values.reshape(n, r // n).mean(axis=1))
        if n % r == 0:
            return FiniteSignal(n, np.repeat(f.values, n // r))
    per_cell = max(1, math.ceil(quadrature / n))
    pts = _cell_midpoints(n, per_cell)
    vals = _evaluate_raw(f, pts).reshape(n, per_cell).mean(axis=1)
    return FiniteSignal(n, vals)


# ---------- Normy i iloczyny skalarne ----------

def _ground_values(f: Signal, quadrature: int) -> np.ndarray:
    return _evaluate_raw(f, ground_grid(quadrature))


def inner_product(f: AnySignal, g: AnySignal, quadrature: int = QUADRATURE_POINTS) -> float:
    """Iloczyn skalarny z wagą jednostajną: (1/n)Σ na siatce, kwadratura na [0,1]."""
    if isinstance(f, FiniteSignal) and isinstance(g, FiniteSignal):
        if f.n != g.n:
            raise ResolutionMismatchError(f"resolutions differ: {f.n} vs {g.n}")
        return float(np.mean(f.values * g.values))
    if isinstance(f, Signal) and isinstance(g, Signal):
        if f.is_piecewise_constant and g.is_piecewise_constant and f.n == g.n:
            return float(np.mean(f.values * g.values))
        return float(np.mean(_ground_values(f, quadrature) * _ground_values(g, quadrature)))
    raise DomainError("inner product between a continuum and a finite signal")


def l2_norm(f: AnySignal, quadrature: int = QUADRATURE_POINTS) -> float:
    if isinstance(f, FiniteSignal):
        return float(np.sqrt(np.mean(f.values ** 2)))
    if f.is_piecewise_constant:
        return float(np.sqrt(np.mean(f.values ** 2)))
    return float(np.sqrt(np.mean(_ground_values(f, quadrature) ** 2)))


def l2_distance(f: AnySignal, g: AnySignal, quadrature: int = QUADRATURE_POINTS) -> float:
    return l2_norm(combine([1.0, -1.0], [f, g]), quadrature)


# ---------- Kombinacje liniowe i mapy punktowe ----------

def constant_signal(c: float) -> Signal:
    return Signal(PIECEWISE_CONSTANT, n=1, values=[c], range_bound=abs(float(c)), lipschitz_const=0.0)


def indicator_signal(n: int, cells: Sequence[int]) -> FiniteSignal:
    """Indykator komórek (numerowanych od 1) na siatce [n]/n."""
    vals = np.zeros(n)
    for c in cells:
        if not 1 <= c <= n:
            raise DomainError(f"cell {c} outside 1..{n}")
        vals[c - 1] = 1.0
    return FiniteSignal(n, vals)


def combine(coefficients: Sequence[float], signals: Sequence[AnySignal]) -> AnySignal:
    """
    Kombinacja liniowa Σ c_i s_i.

    Reprezentacja kawałkami stała / liniowa jest zachowana, gdy wszystkie składniki
    mają tę samą reprezentację i rozdzielczość; w przeciwnym razie wynik jest analityczny.
    """
    if len(coefficients) != len(signals) or not signals:
        raise PreconditionError("combine needs matching, nonempty coefficient and signal lists")
    coeffs = [float(c) for c in coefficients]

    if all(isinstance(s, FiniteSignal) for s in signals):
        n = signals[0].n
        if any(s.n != n for s in signals):
            raise ResolutionMismatchError(f"resolutions differ: {sorted({s.n for s in signals})}")
        vals = np.zeros(n)
        for c, s in zip(coeffs, signals):
            vals = vals + c * s.values
        return FiniteSignal(n, vals)

    if not all(isinstance(s, Signal) for s in signals):
        raise DomainError("cannot combine continuum and finite signals")

    terms = [(c, s) for c, s in zip(coeffs, signals) if c != 0.0]
    if not terms:
        return constant_signal(0.0)

    first = terms[0][1]
    same_grid = all(
        s.representation == first.representation and s.n == first.n for _, s in terms
    )
    if same_grid and first.representation in (PIECEWISE_CONSTANT, PIECEWISE_LINEAR):
        vals = np.zeros_like(first.values)
        for c, s in terms:
            vals = vals + c * s.values
        lip = None
        if first.representation == PIECEWISE_LINEAR:
            lip = float(first.n * np.max(np.abs(np.diff(vals))))
        return Signal(
            first.representation,
            n=first.n,
            values=vals,
            range_bound=float(np.max(np.abs(vals))),
            lipschitz_const=lip,
        )

    def evaluator(x: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(x))
        for c, s in terms:
            out = out + c * _evaluate_raw(s, x)
        return out

    lips = [s.lipschitz_const for _, s in terms]
    lip = None if any(v is None for v in lips) else float(sum(abs(c) * v for (c, _), v in zip(terms, lips)))
    return Signal(
        ANALYTIC,
        evaluator=evaluator,
        range_bound=float(sum(abs(c) * s.range_bound for c, s in terms)),
        lipschitz_const=lip,
    )


def map_pointwise(
    fn: Callable[[np.ndarray], np.ndarray],
    f: AnySignal,
    lipschitz: float = 1.0,
    range_cap: Optional[float] = None,
) -> AnySignal:
    """
    Złożenie fn∘f dla zwektoryzowanej funkcji skalarnej fn z fn(0)=0.

    :param lipschitz: stała Lipschitza fn
    :param range_cap: znane ograniczenie |fn| (np. 1 dla clip)
    """
    if isinstance(f, FiniteSignal):
        return FiniteSignal(f.n, fn(np.asarray(f.values)))
    if f.representation == PIECEWISE_CONSTANT:
        vals = fn(np.asarray(f.values))
        return Signal(PIECEWISE_CONSTANT, n=f.n, values=vals, range_bound=float(np.max(np.abs(vals))))

    bound = lipschitz * f.range_bound
    if range_cap is not None:
        bound = min(bound, range_cap)
    lip = None if f.lipschitz_const is None else lipschitz * f.lipschitz_const
    return Signal(
        ANALYTIC,
        evaluator=lambda x: fn(_evaluate_raw(f, x)),
        range_bound=float(bound),
        lipschitz_const=lip,
    )


# ---------- Mollifier ----------

def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@lru_cache(maxsize=1)
def bump_normalisation() -> float:
    """Z = ∫_{-1}^{1} exp(-1/(1-t^2)) dt."""
    value, _ = integrate.quad(lambda t: math.exp(-1.0 / (1.0 - t * t)), -1.0, 1.0)
    return value


def bump_peak() -> float:
    """Gęstość unormowanego bumpu w zerze."""
    return math.exp(-1.0) / bump_normalisation()


@lru_cache(maxsize=1)
def _bump_cdf_table():
    t = np.linspace(-1.0, 1.0, BUMP_TABLE_POINTS)
    cdf = integrate.cumulative_trapezoid(_bump(t), t, initial=0.0)
    cdf = cdf / cdf[-1]
    t.setflags(write=False)
    cdf.setflags(write=False)
    return t, cdf


def _bump_cdf(s: np.ndarray) -> np.ndarray:
    t, cdf = _bump_cdf_table()
    return np.interp(s, t, cdf)


def mollify(f: Signal, eps: float, quadrature: int = QUADRATURE_POINTS) -> Signal:
    """
    Splot f z przeskalowanym bumpem φ_ε, przy f przedłużonym stałymi f(0), f(1) poza [0,1].

    Splot liczony jest dokładnie dla przybliżenia kawałkami stałego: masa φ_ε nad każdą
    komórką to różnica wartości dystrybuanty bumpu.

    :param f: sygnał o range_bound <= 1
    :param eps: promień nośnika, eps > 0
    :return: sygnał analityczny o stałej Lipschitza max(1, eps^-2, 2φ(0)·sup|f|/eps)
    """
    if not eps > 0:
        raise PreconditionError(f"mollifier radius must be positive, got {eps}")
    if f.range_bound > 1.0 + 1e-12:
        raise PreconditionError(f"mollify expects range_bound <= 1, got {f.range_bound}")

    if f.is_piecewise_constant:
        cell_values = np.asarray(f.values)
    else:
        cell_values = _ground_values(f, quadrature)
    edges = np.linspace(0.0, 1.0, cell_values.size + 1)
    left = float(_evaluate_raw(f, np.array([0.0]))[0])
    right = float(_evaluate_raw(f, np.array([1.0]))[0])
    chunk = max(1, 2_000_000 // edges.size)

    def evaluator(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        out = np.empty(x.size)
        for start in range(0, x.size, chunk):
            xs = x[start:start + chunk]
            F = _bump_cdf((edges[None, :] - xs[:, None]) / eps)
            out[start:start + chunk] = (
                left * F[:, 0]
                + (F[:, 1:] - F[:, :-1]) @ cell_values
                + right * (1.0 - F[:, -1])
            )
        return out

    return Signal(
        ANALYTIC,
        evaluator=evaluator,
        range_bound=float(f.range_bound),
        lipschitz_const=max(1.0, eps ** -2, 2.0 * bump_peak() * f.range_bound / eps),
    )


# ---------- Losowe sygnały Lipschitza ----------

def lipschitz_schedule(C_v: float, n: Optional[int], schedule: str = "fixed") -> float:
    """Stała Lipschitza funkcji testowych L(n) dla rosnących profili."""
    if schedule == "fixed" or n is None:
        return C_v
    if schedule == "sqrt":
        return C_v * math.sqrt(n)
    if schedule == "log":
        return C_v * (1.0 + math.log(n))
    raise PreconditionError(f"unknown lipschitz schedule {schedule!r}")


def _sample_piecewise_linear(C_v: float, rng: np.random.Generator) -> Signal:
    segments = max(1, math.ceil(PL_NODES_PER_UNIT * C_v))
    start = rng.uniform(-1.0, 1.0)
    steps = rng.uniform(-C_v / segments, C_v / segments, size=segments)
    nodes = np.clip(start + np.concatenate(([0.0], np.cumsum(steps))), -1.0, 1.0)
    return Signal(
        PIECEWISE_LINEAR,
        n=segments,
        values=nodes,
        range_bound=float(np.max(np.abs(nodes))),
        lipschitz_const=float(segments * np.max(np.abs(np.diff(nodes)))),
    )


def _sample_mollified_noise(C_v: float, rng: np.random.Generator) -> Signal:
    noise = rng.uniform(-1.0, 1.0, size=NOISE_CELLS)
    eps = C_v ** -0.5
    base = Signal(PIECEWISE_CONSTANT, n=NOISE_CELLS, values=noise, range_bound=float(np.max(np.abs(noise))))
    g = mollify(base, eps)
    # |g'| <= sup|f| * ∫|φ_ε'| = 2 φ(0) sup|f| / ε
    slope = 2.0 * bump_peak() * base.range_bound / eps
    if slope <= C_v:
        return replace(g, lipschitz_const=slope)
    scale = C_v / slope
    scaled = combine([scale], [g])
    return replace(scaled, lipschitz_const=C_v, range_bound=scale * g.range_bound)


def sample_lipschitz_tuple(
    k: int, C_v: float, seed: int, family: str = FAMILY_PIECEWISE_LINEAR
) -> List[Signal]:
    """
    k losowych sygnałów o |f| <= 1 i stałej Lipschitza <= C_v, deterministycznie z ziarna.

    :param family: "piecewise-linear" albo "mollified-noise"
    """
    if not C_v > 0:
        raise PreconditionError(f"C_v must be positive, got {C_v}")
    if family == FAMILY_PIECEWISE_LINEAR:
        draw = _sample_piecewise_linear
    elif family == FAMILY_MOLLIFIED_NOISE:
        draw = _sample_mollified_noise
    else:
        raise PreconditionError(f"unknown signal family {family!r}")
    streams = np.random.SeedSequence(seed).spawn(k)
    return [draw(C_v, np.random.default_rng(s)) for s in streams]


# ---------- Estymatory ----------

def _scan_grid(step: float) -> np.ndarray:
    count = int(round(1.0 / step))
    return np.linspace(0.0, 1.0, count + 1)


def lipschitz_estimate(f: Signal, step: float = FD_STEP) -> float:
    """Ilorazy różnicowe na siatce o kroku step."""
    xs = _scan_grid(step)
    vals = _evaluate_raw(f, xs)
    return float(np.max(np.abs(np.diff(vals))) / (xs[1] - xs[0]))


def range_estimate(f: Signal, step: float = FD_STEP) -> float:
    return float(np.max(np.abs(_evaluate_raw(f, _scan_grid(step)))))


# ---------- Rekordy ----------

def signal_to_record(f: AnySignal) -> Dict:
    if isinstance(f, FiniteSignal):
        return {"repr": "finite", "n": f.n, "values": f.values.tolist()}
    if f.representation == ANALYTIC:
        raise SerializationError("analytic signals have no finite record")
    key = "values" if f.representation == PIECEWISE_CONSTANT else "node_values"
    return {
        "repr": f.representation,
        "n": f.n,
        key: f.values.tolist(),
        "range_bound": f.range_bound,
        "lipschitz_const": f.lipschitz_const,
    }


def signal_from_record(record: Dict) -> AnySignal:
    try:
        rep = record["repr"]
        n = int(record["n"])
        if rep == "finite":
            return FiniteSignal(n, record["values"])
        if rep == PIECEWISE_CONSTANT:
            vals = record["values"]
        elif rep == PIECEWISE_LINEAR:
            vals = record["node_values"]
        else:
            raise SerializationError(f"unknown signal repr {rep!r}")
        return Signal(
            rep,
            n=n,
            values=vals,
            range_bound=float(record.get("range_bound", np.max(np.abs(vals)))),
            lipschitz_const=record.get("lipschitz_const"),
        )
    except (KeyError, TypeError) as e:
        raise SerializationError(f"malformed signal record: {e}") from e
