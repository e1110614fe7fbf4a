# operator_model.py
"""
P-operatory: katalog graphopów, algebra operatorów z propagacją stałych
i dyskretyzacja A_m X = restrict(A(extend_pc(X)), m).

Operator ciągły działa na Signal (domain=None), operator skończony na
FiniteSignal o rozdzielczości domain.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Hashable, Optional

import numpy as np

from config import DEFAULT_SHIFT, MAX_HYPERCUBE_DIM, QUADRATURE_POINTS
from models import (
    FLAG_CONSTANT_TO_CONSTANT,
    FLAG_CONSTANT_TO_LIPSCHITZ,
    FLAG_LIPSCHITZ_TO_LIPSCHITZ,
    CheckReport,
    DomainError,
    OperatorConstants,
    PreconditionError,
    ResolutionSet,
    SerializationError,
)
from signal_model import (
    ANALYTIC,
    PIECEWISE_CONSTANT,
    AnySignal,
    FiniteSignal,
    Signal,
    _evaluate_raw,
    cell_index,
    combine,
    constant_signal,
    extend_pc,
    ground_grid,
    inner_product,
    map_pointwise,
    restrict,
    sample_lipschitz_tuple,
)

logger = logging.getLogger(__name__)

KIND_GRAPHON = "graphon"
KIND_SHIFT = "shift-graphing"
KIND_COPIES = "copies-graphing"
KIND_HYPERCUBE = "hypercube"
KIND_FINITE = "finite-matrix"
KIND_COMPOSITE = "algebraic-composite"
KIND_GNN = "gnn"
KIND_IDENTITY = "identity"
KIND_CONSTANT = "constant"

_BOTH_FLAGS = frozenset({FLAG_CONSTANT_TO_CONSTANT, FLAG_LIPSCHITZ_TO_LIPSCHITZ})


# ---------- POperator ----------

@dataclass(frozen=True, eq=False)
class POperator:
    kind: str
    apply_fn: Callable[[AnySignal], AnySignal]
    constants: OperatorConstants
    is_linear: bool
    is_self_adjoint: bool
    domain: Optional[int] = None
    name: str = ""
    root_key: Hashable = field(default_factory=object)
    _cache: Dict = field(default_factory=dict, repr=False)

    @property
    def is_finite(self) -> bool:
        return self.domain is not None

    def check_domain(self, f: AnySignal) -> None:
        if self.domain is None:
            if not isinstance(f, Signal):
                raise DomainError(f"{self.name or self.kind} acts on [0,1], got a finite signal")
        else:
            if not isinstance(f, FiniteSignal):
                raise DomainError(f"{self.name or self.kind} acts on F_{self.domain}, got a continuum signal")
            if f.n != self.domain:
                raise DomainError(f"{self.name or self.kind} acts on F_{self.domain}, got resolution {f.n}")

    def apply(self, f: AnySignal) -> AnySignal:
        self.check_domain(f)
        return self.apply_fn(f)

    def __call__(self, f: AnySignal) -> AnySignal:
        return self.apply(f)

    def zero_signal(self) -> AnySignal:
        if self.domain is None:
            return constant_signal(0.0)
        return FiniteSignal(self.domain, np.zeros(self.domain))

    def matrix(self) -> np.ndarray:
        """Macierz n×n skończonego operatora liniowego (próbkowanie indykatorami)."""
        if self.domain is None or not self.is_linear:
            raise DomainError("matrix realisation needs a finite linear operator")
        if "matrix" not in self._cache:
            n = self.domain
            cols = []
            for v in range(n):
                e = np.zeros(n)
                e[v] = 1.0
                cols.append(self.apply_fn(FiniteSignal(n, e)).values)
            T = np.column_stack(cols)
            T.setflags(write=False)
            self._cache["matrix"] = T
            logger.debug("Materialised %s as %dx%d matrix", self.name or self.kind, n, n)
        return self._cache["matrix"]


def _shares_space(A: POperator, B: POperator) -> None:
    if A.domain != B.domain:
        raise DomainError(f"operators act on different spaces: {A.domain} vs {B.domain}")


# ---------- Kernele graphonów ----------

@dataclass(frozen=True)
class Kernel:
    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup: float
    lipschitz: Optional[float]

    def __call__(self, x, y):
        return self.fn(x, y)


def constant_kernel(w: float = 1.0) -> Kernel:
    return Kernel("constant", lambda x, y: np.full(np.broadcast(x, y).shape, float(w)), abs(w), 0.0)


def product_kernel() -> Kernel:
    return Kernel("product", lambda x, y: x * y, 1.0, 1.0)


def gaussian_bump_kernel(sigma: float = 0.2) -> Kernel:
    if not sigma > 0:
        raise PreconditionError(f"sigma must be positive, got {sigma}")
    return Kernel(
        "gaussian-bump",
        lambda x, y: np.exp(-((x - y) ** 2) / (2.0 * sigma ** 2)),
        1.0,
        math.exp(-0.5) / sigma,
    )


def min_kernel() -> Kernel:
    return Kernel("min-kernel", np.minimum, 1.0, 1.0)


KERNELS: Dict[str, Callable[..., Kernel]] = {
    "constant": constant_kernel,
    "product": product_kernel,
    "gaussian-bump": gaussian_bump_kernel,
    "min-kernel": min_kernel,
}


def make_kernel(name: str, **params: float) -> Kernel:
    try:
        factory = KERNELS[name]
    except KeyError:
        raise PreconditionError(f"unknown kernel {name!r}, known: {sorted(KERNELS)}") from None
    return factory(**params)


# ---------- Katalog ----------

def make_graphon_op(kernel, C_v: float = 1.0, quadrature: int = QUADRATURE_POINTS) -> POperator:
    """
    Operator całkowy (Af)(x) = ∫ W(x,y) f(y) dy, kwadratura w Q punktach środkowych.

    :param kernel: Kernel albo zwektoryzowana funkcja W(x, y)
    :param C_v: deklarowana stała Lipschitza kernela
    :raises PreconditionError: gdy próbka wykazuje asymetrię W
    """
    if not isinstance(kernel, Kernel):
        probe = np.linspace(0.0, 1.0, 65)
        sup = float(np.max(np.abs(kernel(probe[:, None], probe[None, :]))))
        kernel = Kernel(getattr(kernel, "__name__", "custom"), kernel, sup, None)

    rng = np.random.default_rng(0)
    xs, ys = rng.random(32), rng.random(32)
    asym = float(np.max(np.abs(kernel(xs, ys) - kernel(ys, xs))))
    if asym > 1e-12:
        raise PreconditionError(f"kernel {kernel.name} is not symmetric (gap {asym:.3g})")
    flags = frozenset({FLAG_LIPSCHITZ_TO_LIPSCHITZ})
    if kernel.lipschitz is not None and kernel.lipschitz > C_v * (1 + 1e-9):
        logger.warning("kernel %s has Lipschitz constant %.4g > declared C_v=%.4g, dropping %s",
                       kernel.name, kernel.lipschitz, C_v, FLAG_LIPSCHITZ_TO_LIPSCHITZ)
        flags = frozenset()

    grid = ground_grid(quadrature)
    chunk = max(1, 1_000_000 // quadrature)

    def apply_fn(f: Signal) -> Signal:
        fy = _evaluate_raw(f, grid)
        weight = float(np.mean(np.abs(fy)))

        def evaluator(x: np.ndarray) -> np.ndarray:
            x = np.asarray(x, dtype=float).reshape(-1)
            out = np.empty(x.size)
            for start in range(0, x.size, chunk):
                xs_ = x[start:start + chunk]
                out[start:start + chunk] = kernel(xs_[:, None], grid[None, :]) @ fy / quadrature
            return out

        lip = None if kernel.lipschitz is None else kernel.lipschitz * weight
        return Signal(ANALYTIC, evaluator=evaluator, range_bound=kernel.sup * weight, lipschitz_const=lip)

    logger.debug("Built graphon operator with kernel %s (sup=%.4g)", kernel.name, kernel.sup)
    return POperator(
        kind=KIND_GRAPHON,
        apply_fn=apply_fn,
        constants=OperatorConstants(
            C_A=kernel.sup,
            resolution_set=ResolutionSet.all(),
            assumption_flags=flags,
        ),
        is_linear=True,
        is_self_adjoint=True,
        name=f"graphon[{kernel.name}]",
    )


def make_shift_graphing(a: float, normalize: bool = False) -> POperator:
    """(Af)(x) = f(x+a mod 1) + f(x-a mod 1), podzielone przez 2 gdy normalize."""
    if not 0.0 < a < 1.0:
        raise PreconditionError(f"shift must lie in (0,1), got {a}")
    factor = 0.5 if normalize else 1.0

    def apply_fn(f: Signal) -> Signal:
        def evaluator(x: np.ndarray) -> np.ndarray:
            return factor * (_evaluate_raw(f, np.mod(x + a, 1.0)) + _evaluate_raw(f, np.mod(x - a, 1.0)))

        lip = None if f.lipschitz_const is None else 2.0 * factor * f.lipschitz_const
        return Signal(ANALYTIC, evaluator=evaluator, range_bound=2.0 * factor * f.range_bound,
                      lipschitz_const=lip)

    return POperator(
        kind=KIND_SHIFT,
        apply_fn=apply_fn,
        constants=OperatorConstants(C_A=2.0 * factor),
        is_linear=True,
        is_self_adjoint=True,
        name=f"shift[a={a:.6g}{',normalized' if normalize else ''}]",
    )


def make_whp_shift_graphing(N: int, variant: str = "lipschitz") -> POperator:
    """
    Przesunięcie o a = 1/(4N^2)+δ (variant "constant", bez normalizacji)
    albo a = 1/(4N)+δ (variant "lipschitz", znormalizowane).
    """
    if N < 1:
        raise PreconditionError(f"N must be >= 1, got {N}")
    if variant == "constant":
        base = 1.0 / (4 * N * N)
        return make_shift_graphing(base * (1.0 + (math.sqrt(2.0) - 1.0) / 10.0), normalize=False)
    if variant == "lipschitz":
        base = 1.0 / (4 * N)
        return make_shift_graphing(base * (1.0 + (math.sqrt(2.0) - 1.0) / 10.0), normalize=True)
    raise PreconditionError(f"unknown whp variant {variant!r}")


def _divisors(N: int):
    return [d for d in range(1, N + 1) if N % d == 0]


def make_copies_graphing(N: int, a: float = DEFAULT_SHIFT) -> POperator:
    """
    N rozłącznych kopii grafu przesunięć, każda ściśnięta do komórki 1/N.

    Sąsiedzi x leżą w tej samej komórce (s, s+1/N].
    """
    if N < 1:
        raise PreconditionError(f"N must be >= 1, got {N}")
    if not 0.0 < a < 1.0:
        raise PreconditionError(f"shift must lie in (0,1), got {a}")
    width = 1.0 / N
    step = a / N

    def neighbours(x: np.ndarray):
        s = cell_index(x, N) * width
        t = x - s
        result = []
        for sign in (1.0, -1.0):
            r = np.mod(t + sign * step, width)
            r = np.where(r <= 0.0, r + width, r)
            result.append(np.clip(s + r, 0.0, 1.0))
        return result

    def apply_fn(f: Signal) -> Signal:
        if f.is_piecewise_constant and N % f.n == 0:
            return Signal(PIECEWISE_CONSTANT, n=f.n, values=2.0 * f.values, range_bound=2.0 * f.range_bound)

        def evaluator(x: np.ndarray) -> np.ndarray:
            plus, minus = neighbours(np.asarray(x, dtype=float))
            return _evaluate_raw(f, plus) + _evaluate_raw(f, minus)

        return Signal(ANALYTIC, evaluator=evaluator, range_bound=2.0 * f.range_bound)

    return POperator(
        kind=KIND_COPIES,
        apply_fn=apply_fn,
        constants=OperatorConstants(
            C_A=2.0,
            C_c=0.0,
            resolution_set=ResolutionSet.of(_divisors(N)),
            assumption_flags=frozenset({FLAG_CONSTANT_TO_CONSTANT}),
        ),
        is_linear=True,
        is_self_adjoint=True,
        name=f"copies[N={N}]",
    )


def make_hypercube_op(N: int) -> POperator:
    """
    (Af)(x) = (1/N) Σ_i f(x z odwróconą i-tą cyfrą binarną).

    Dla wejść kawałkami stałych o rozdzielczości 2^r wynik liczony jest
    dokładnie na indeksach komórek.
    """
    if not 1 <= N <= MAX_HYPERCUBE_DIM:
        raise PreconditionError(f"hypercube dimension must be in 1..{MAX_HYPERCUBE_DIM}, got {N}")

    def apply_fn(f: Signal) -> Signal:
        if f.is_piecewise_constant and (f.n & (f.n - 1)) == 0:
            r = f.n.bit_length() - 1
            flips = min(r, N)
            idx = np.arange(f.n)
            acc = (N - flips) * np.asarray(f.values)
            for i in range(1, flips + 1):
                acc = acc + f.values[idx ^ (1 << (r - i))]
            vals = acc / N
            return Signal(PIECEWISE_CONSTANT, n=f.n, values=vals, range_bound=float(np.max(np.abs(vals))))

        def evaluator(x: np.ndarray) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            acc = np.zeros(x.shape)
            for i in range(1, N + 1):
                scale = 2.0 ** i
                digit = np.mod(np.floor(x * scale), 2.0)
                y = np.clip(x + (1.0 - 2.0 * digit) / scale, 0.0, 1.0)
                acc = acc + _evaluate_raw(f, y)
            return acc / N

        return Signal(ANALYTIC, evaluator=evaluator, range_bound=f.range_bound)

    logger.debug("Built hypercube operator N=%d", N)
    return POperator(
        kind=KIND_HYPERCUBE,
        apply_fn=apply_fn,
        constants=OperatorConstants(
            C_A=1.0,
            C_c=0.0,
            resolution_set=ResolutionSet.of(2 ** j for j in range(1, N + 1)),
            assumption_flags=frozenset({FLAG_CONSTANT_TO_CONSTANT}),
        ),
        is_linear=True,
        is_self_adjoint=True,
        name=f"hypercube[N={N}]",
    )


def make_finite_matrix_op(M, check_symmetry: bool = True) -> POperator:
    """
    Operator na F_n: (AX)(u) = (1/n) Σ_v M[u,v] X(v).

    :param check_symmetry: False pozwala zbudować operator niesymetryczny
                           (deklarowany jako nie samosprzężony)
    """
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise PreconditionError(f"matrix must be square, got shape {M.shape}")
    n = M.shape[0]
    symmetric = bool(np.max(np.abs(M - M.T)) <= 1e-12)
    if check_symmetry and not symmetric:
        raise PreconditionError(f"matrix is not symmetric (max gap {np.max(np.abs(M - M.T)):.3g})")
    T = M / n
    T.setflags(write=False)

    def apply_fn(X: FiniteSignal) -> FiniteSignal:
        return FiniteSignal(n, T @ X.values)

    op = POperator(
        kind=KIND_FINITE,
        apply_fn=apply_fn,
        constants=OperatorConstants(C_A=float(np.max(np.sum(np.abs(T), axis=1)))),
        is_linear=True,
        is_self_adjoint=symmetric,
        domain=n,
        name=f"matrix[n={n}]",
    )
    op._cache["matrix"] = T
    return op


def load_matrix_csv(path: Path) -> np.ndarray:
    """CSV: pierwsza linia n, potem n wierszy po n liczb."""
    try:
        with Path(path).open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
        n = int(rows[0][0])
        M = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except (OSError, ValueError, IndexError) as e:
        raise SerializationError(f"cannot read matrix from {path}: {e}") from e
    if M.shape != (n, n):
        raise SerializationError(f"matrix file {path} declares n={n} but holds shape {M.shape}")
    return M


def make_identity_op(domain: Optional[int] = None) -> POperator:
    return POperator(
        kind=KIND_IDENTITY,
        apply_fn=lambda f: f,
        constants=OperatorConstants(
            C_A=1.0, C_c=0.0, resolution_set=ResolutionSet.all(), assumption_flags=_BOTH_FLAGS
        ),
        is_linear=True,
        is_self_adjoint=True,
        domain=domain,
        name="identity",
    )


def make_constant_op(c: float, domain: Optional[int] = None) -> POperator:
    """Odwzorowanie f -> c (nieliniowe dla c != 0)."""
    c = float(c)

    def apply_fn(f: AnySignal) -> AnySignal:
        if domain is None:
            return constant_signal(c)
        return FiniteSignal(domain, np.full(domain, c))

    return POperator(
        kind=KIND_CONSTANT,
        apply_fn=apply_fn,
        constants=OperatorConstants(
            C_A=0.0, C_c=0.0, resolution_set=ResolutionSet.all(), assumption_flags=_BOTH_FLAGS
        ),
        is_linear=c == 0.0,
        is_self_adjoint=c == 0.0,
        domain=domain,
        name=f"constant[{c:g}]",
    )


# ---------- Dyskretyzacja ----------

def discretize(A: POperator, m: int) -> POperator:
    """A_m X = restrict(A(extend_pc(X)), m); dziedziczy stałe i korzeń linii."""
    if A.domain is not None:
        raise DomainError(f"discretize needs a continuum operator, {A.name} acts on F_{A.domain}")
    if m < 1:
        raise PreconditionError(f"resolution must be >= 1, got {m}")

    def apply_fn(X: FiniteSignal) -> FiniteSignal:
        return restrict(A.apply(extend_pc(X)), m)

    return POperator(
        kind=A.kind,
        apply_fn=apply_fn,
        constants=A.constants,
        is_linear=A.is_linear,
        is_self_adjoint=A.is_self_adjoint,
        domain=m,
        name=f"{A.name}_{m}",
        root_key=A.root_key,
    )


# ---------- Algebra ----------

def _derived_constants(C_A, C_c, resolution_set: ResolutionSet, flags) -> OperatorConstants:
    if resolution_set.is_empty():
        flags = frozenset()
    return OperatorConstants(C_A=C_A, C_c=C_c, resolution_set=resolution_set, assumption_flags=frozenset(flags))


def _sum_optional(a: Optional[float], b: Optional[float]) -> Optional[float]:
    if a is None or b is None:
        return None
    return a + b


def _effective_C_c(A: POperator) -> Optional[float]:
    if A.constants.has(FLAG_CONSTANT_TO_CONSTANT):
        return 0.0 if A.constants.C_c is None else A.constants.C_c
    return A.constants.C_c


def op_add(A: POperator, B: POperator) -> POperator:
    _shares_space(A, B)
    flags = A.constants.assumption_flags & B.constants.assumption_flags
    constants = _derived_constants(
        C_A=A.constants.C_A + B.constants.C_A,
        C_c=_sum_optional(_effective_C_c(A), _effective_C_c(B)),
        resolution_set=A.constants.resolution_set.intersect(B.constants.resolution_set),
        flags=flags,
    )
    return POperator(
        kind=KIND_COMPOSITE,
        apply_fn=lambda f: combine([1.0, 1.0], [A.apply_fn(f), B.apply_fn(f)]),
        constants=constants,
        is_linear=A.is_linear and B.is_linear,
        is_self_adjoint=A.is_self_adjoint and B.is_self_adjoint,
        domain=A.domain,
        name=f"({A.name}+{B.name})",
    )


def op_scale(alpha: float, A: POperator) -> POperator:
    alpha = float(alpha)
    c_c = _effective_C_c(A)
    constants = OperatorConstants(
        C_A=abs(alpha) * A.constants.C_A,
        C_c=None if c_c is None else abs(alpha) * c_c,
        resolution_set=A.constants.resolution_set,
        assumption_flags=A.constants.assumption_flags,
    )

    def apply_fn(f: AnySignal) -> AnySignal:
        if alpha == 0.0:
            return A.zero_signal()
        return combine([alpha], [A.apply_fn(f)])

    return POperator(
        kind=KIND_COMPOSITE,
        apply_fn=apply_fn,
        constants=constants,
        is_linear=A.is_linear or alpha == 0.0,
        is_self_adjoint=A.is_self_adjoint or alpha == 0.0,
        domain=A.domain,
        name=f"{alpha:g}*{A.name}",
        root_key=("scale", alpha, A.root_key),
    )


def op_compose(B: POperator, A: POperator) -> POperator:
    """B∘A. Flagi kawałków przetrwają tylko, gdy A zachowuje stałe kawałki."""
    _shares_space(A, B)
    flags = A.constants.assumption_flags & B.constants.assumption_flags
    if not A.constants.has(FLAG_CONSTANT_TO_CONSTANT):
        flags = flags - {FLAG_CONSTANT_TO_CONSTANT, FLAG_CONSTANT_TO_LIPSCHITZ}
    c_c = _effective_C_c(B) if A.constants.has(FLAG_CONSTANT_TO_CONSTANT) else None
    constants = _derived_constants(
        C_A=A.constants.C_A * B.constants.C_A,
        C_c=c_c,
        resolution_set=A.constants.resolution_set.intersect(B.constants.resolution_set),
        flags=flags,
    )
    return POperator(
        kind=KIND_COMPOSITE,
        apply_fn=lambda f: B.apply_fn(A.apply_fn(f)),
        constants=constants,
        is_linear=A.is_linear and B.is_linear,
        is_self_adjoint=False,
        domain=A.domain,
        name=f"{B.name}∘{A.name}",
    )


def op_power(A: POperator, k: int) -> POperator:
    """A^k przez k-krotne złożenie; A^0 to identyczność, A^1 to A."""
    if k < 0:
        raise PreconditionError(f"power must be >= 0, got {k}")
    if k == 0:
        return make_identity_op(A.domain)
    if k == 1:
        return A

    def apply_fn(f: AnySignal) -> AnySignal:
        out = f
        for _ in range(k):
            out = A.apply_fn(out)
        return out

    flags = A.constants.assumption_flags
    if not A.constants.has(FLAG_CONSTANT_TO_CONSTANT):
        flags = flags - {FLAG_CONSTANT_TO_LIPSCHITZ}
    return POperator(
        kind=KIND_COMPOSITE,
        apply_fn=apply_fn,
        constants=OperatorConstants(
            C_A=A.constants.C_A ** k,
            C_c=_effective_C_c(A) if A.constants.has(FLAG_CONSTANT_TO_CONSTANT) else None,
            resolution_set=A.constants.resolution_set,
            assumption_flags=flags,
        ),
        is_linear=A.is_linear,
        is_self_adjoint=A.is_self_adjoint,
        domain=A.domain,
        name=f"{A.name}^{k}",
        root_key=("power", k, A.root_key),
    )


def op_after_rho(rho: Callable[[np.ndarray], np.ndarray], A: POperator, name: str = "rho") -> POperator:
    """ρ∘A dla 1-lipschitzowskiej ρ z ρ(0)=0; stałe bez zmian."""
    return POperator(
        kind=KIND_COMPOSITE,
        apply_fn=lambda f: map_pointwise(rho, A.apply_fn(f)),
        constants=A.constants,
        is_linear=False,
        is_self_adjoint=False,
        domain=A.domain,
        name=f"{name}∘{A.name}",
        root_key=("after", name, A.root_key),
    )


# ---------- Sprawdzenia ----------

def _random_pair(A: POperator, rng: np.random.Generator, trial: int):
    if A.domain is not None:
        n = A.domain
        return FiniteSignal(n, rng.uniform(-1, 1, n)), FiniteSignal(n, rng.uniform(-1, 1, n))
    seed = int(rng.integers(0, 2 ** 31))
    if trial % 2 == 0:
        f, g = sample_lipschitz_tuple(2, 4.0, seed)
        return f, g
    cells = 16
    return (
        Signal(PIECEWISE_CONSTANT, n=cells, values=rng.uniform(-1, 1, cells), range_bound=1.0),
        Signal(PIECEWISE_CONSTANT, n=cells, values=rng.uniform(-1, 1, cells), range_bound=1.0),
    )


def check_self_adjoint(A: POperator, trials: int = 100, tol: float = 1e-9, seed: int = 0) -> CheckReport:
    """
    max |<Af,g> - <f,Ag>| po losowych parach; dla skończonych operatorów liniowych
    sprawdzane są też wszystkie pary indykatorów.
    """
    rng = np.random.default_rng(seed)
    worst, witness = 0.0, None
    for trial in range(trials):
        f, g = _random_pair(A, rng, trial)
        gap = abs(inner_product(A.apply(f), g) - inner_product(f, A.apply(g)))
        if gap > worst:
            worst, witness = gap, f"random pair #{trial}"
    if A.domain is not None and A.is_linear:
        T = A.matrix()
        gaps = np.abs(T - T.T) / A.domain
        u, v = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
        if gaps[u, v] > worst:
            worst, witness = float(gaps[u, v]), f"indicators of cells {u + 1},{v + 1}"
    passed = worst <= tol
    if not passed:
        logger.debug("Self-adjointness check failed for %s: %.3g (%s)", A.name, worst, witness)
    return CheckReport(
        check="self-adjoint",
        passed=passed,
        measured=float(worst),
        threshold=tol,
        trials=trials,
        resolution=A.domain,
        witness=None if passed else witness,
    )


# ---------- Budowanie z konfiguracji ----------

def build_operator(spec) -> POperator:
    """
    Operator ciągły (albo skończony dla finite-matrix) ze specyfikacji OperatorSpec,
    bez uwzględnienia pola discretize.
    """
    kind = spec.kind
    if kind == "graphon":
        return make_graphon_op(make_kernel(spec.kernel, **spec.kernel_params), C_v=spec.C_v)
    if kind == "shift-graphing":
        return make_shift_graphing(spec.a if spec.a is not None else DEFAULT_SHIFT, spec.normalize)
    if kind == "whp-shift-graphing":
        return make_whp_shift_graphing(spec.N, spec.variant)
    if kind == "copies-graphing":
        return make_copies_graphing(spec.N, spec.a if spec.a is not None else DEFAULT_SHIFT)
    if kind == "hypercube":
        return make_hypercube_op(spec.N)
    if kind == "finite-matrix":
        return make_finite_matrix_op(load_matrix_csv(spec.matrix_file))
    if kind == "identity":
        return make_identity_op()
    if kind == "constant":
        return make_constant_op(spec.value)
    raise PreconditionError(f"unknown operator kind {kind!r}")


def build_operator_pair(spec_a, spec_b=None):
    """
    Para operatorów do porównania. Specyfikacje różniące się tylko rozdzielczością
    dyskretyzacji dzielą jeden operator bazowy (a więc korzeń linii).
    """
    base_a = build_operator(spec_a.base())
    if spec_b is None:
        spec_b = spec_a
    if spec_b.base() == spec_a.base():
        base_b = base_a
    else:
        base_b = build_operator(spec_b.base())

    def finish(base: POperator, spec) -> POperator:
        return discretize(base, spec.discretize) if spec.discretize else base

    A = finish(base_a, spec_a)
    if spec_b == spec_a:
        return A, A
    return A, finish(base_b, spec_b)
