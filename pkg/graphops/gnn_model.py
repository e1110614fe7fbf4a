# gnn_model.py
"""
Konwolucje graphopowe i sieci neuronowe na graphopach.

Warstwa l: X_{l,f} = ρ(Σ_g Σ_k h^l_{f,g,k} A^k X_{l-1,g}), bez aktywacji na X_0.
Ta sama ścieżka obsługuje operator ciągły A i jego dyskretyzację A_n.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from models import (
    FLAG_CONSTANT_TO_CONSTANT,
    BoundReport,
    DomainError,
    OperatorConstants,
    ParameterNormalizationError,
    PreconditionError,
    SerializationError,
)
from operator_model import KIND_COMPOSITE, KIND_GNN, POperator, discretize
from signal_model import AnySignal, FiniteSignal, combine, extend_pc, l2_distance, map_pointwise

logger = logging.getLogger(__name__)


# ---------- Aktywacje ----------

@dataclass(frozen=True)
class Activation:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    range_cap: Optional[float] = None


def _clip(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -1.0, 1.0)


def _leaky_abs(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, -0.5 * x)


# wszystkie 1-lipschitzowskie z ρ(0) = 0
ACTIVATIONS: Dict[str, Activation] = {
    "clip": Activation("clip", _clip, 1.0),
    "tanh": Activation("tanh", np.tanh, 1.0),
    "leaky-abs": Activation("leaky-abs", _leaky_abs, None),
}


# ---------- Parametry ----------

@dataclass(frozen=True, eq=False)
class GnnParams:
    """
    Parametry sieci: h[l] ma kształt (n_{l+1}, n_l, K), widths = (n_0=1, ..., n_L).
    """
    L: int
    widths: Tuple[int, ...]
    K: int
    h: Tuple[np.ndarray, ...]
    activation: str = "clip"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        arrays = []
        for layer in self.h:
            arr = np.array(layer, dtype=float)
            arr.setflags(write=False)
            arrays.append(arr)
        object.__setattr__(self, "h", tuple(arrays))

    def validate(self) -> "GnnParams":
        """
        :raises PreconditionError: niespójne kształty lub nieznana aktywacja
        :raises ParameterNormalizationError: gdy któryś |h| > 1
        """
        if self.L < 1 or self.K < 1:
            raise PreconditionError(f"L and K must be >= 1, got L={self.L}, K={self.K}")
        if len(self.widths) != self.L + 1 or self.widths[0] != 1:
            raise PreconditionError(f"widths must have L+1 entries starting with 1, got {self.widths}")
        if len(self.h) != self.L:
            raise PreconditionError(f"expected {self.L} filter layers, got {len(self.h)}")
        for l, arr in enumerate(self.h):
            expected = (self.widths[l + 1], self.widths[l], self.K)
            if arr.shape != expected:
                raise PreconditionError(f"layer {l + 1} filter has shape {arr.shape}, expected {expected}")
        if self.activation not in ACTIVATIONS:
            raise PreconditionError(f"unknown activation {self.activation!r}")
        worst = max(float(np.max(np.abs(arr))) for arr in self.h)
        if worst > 1.0:
            raise ParameterNormalizationError(f"filter coefficients must satisfy |h| <= 1, found {worst:g}")
        return self

    @property
    def n_max(self) -> int:
        return max(self.widths)

    def to_record(self) -> Dict:
        return {
            "L": self.L,
            "widths": list(self.widths),
            "K": self.K,
            "activation": self.activation,
            "h": [arr.tolist() for arr in self.h],
        }

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_record(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


class _GnnParamsFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    L: int = Field(ge=1)
    widths: List[int]
    K: int = Field(ge=1)
    activation: Literal["clip", "tanh", "leaky-abs"] = "clip"
    h: List[List[List[List[float]]]]

    @model_validator(mode="after")
    def _shapes(self) -> "_GnnParamsFile":
        if len(self.widths) != self.L + 1 or self.widths[0] != 1:
            raise ValueError("widths must have L+1 entries starting with 1")
        if len(self.h) != self.L:
            raise ValueError(f"h must have {self.L} layers")
        for l, layer in enumerate(self.h):
            if len(layer) != self.widths[l + 1] or any(len(row) != self.widths[l] for row in layer):
                raise ValueError(f"h layer {l + 1} does not match widths")
            if any(len(taps) != self.K for row in layer for taps in row):
                raise ValueError(f"h layer {l + 1} needs K={self.K} taps per filter")
        return self


def load_gnn_params(path: Path) -> GnnParams:
    """Wczytuje parametry z JSON; normalizacja |h| <= 1 sprawdzana jest osobno w validate()."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        parsed = _GnnParamsFile.model_validate(raw)
    except (OSError, json.JSONDecodeError) as e:
        raise SerializationError(f"cannot read GNN params from {path}: {e}") from e
    except ValidationError as e:
        raise SerializationError(f"invalid GNN params in {path}: {e.errors()[0].get('msg', e)}") from e
    return GnnParams(parsed.L, tuple(parsed.widths), parsed.K, tuple(parsed.h), parsed.activation)


def gnn_params_to_json(params: GnnParams) -> str:
    return json.dumps(params.to_record(), indent=2)


def random_gnn_params(
    L: int, widths: Sequence[int], K: int, activation: str = "clip", seed: int = 0
) -> GnnParams:
    """Parametry z rozkładu jednostajnego na [-1,1]."""
    widths = tuple(widths)
    if len(widths) != L + 1:
        raise PreconditionError(f"widths must have L+1 entries, got {widths}")
    rng = np.random.default_rng(seed)
    h = tuple(rng.uniform(-1.0, 1.0, size=(widths[l + 1], widths[l], K)) for l in range(L))
    return GnnParams(L, widths, K, h, activation).validate()


# ---------- Konwolucja ----------

def _powers(A: POperator, x: AnySignal, K: int) -> List[AnySignal]:
    out = [x]
    for _ in range(K - 1):
        out.append(A.apply(out[-1]))
    return out


def graphop_conv(h_vec: Sequence[float], A: POperator) -> POperator:
    """Filtr X -> Σ_k h_k A^k X z A^0 = identyczność."""
    h_vec = [float(v) for v in h_vec]
    if not h_vec:
        raise PreconditionError("graphop convolution needs K >= 1 taps")
    if max(abs(v) for v in h_vec) > 1.0:
        raise ParameterNormalizationError(f"filter taps must satisfy |h| <= 1, got {h_vec}")
    last = max((k for k, v in enumerate(h_vec) if v != 0.0), default=0)

    def apply_fn(x: AnySignal) -> AnySignal:
        powers = _powers(A, x, last + 1)
        terms = [(h_vec[k], powers[k]) for k in range(last + 1) if h_vec[k] != 0.0]
        if not terms:
            return A.zero_signal()
        return combine([c for c, _ in terms], [p for _, p in terms])

    C_A = sum(abs(v) * A.constants.C_A ** k for k, v in enumerate(h_vec))
    return POperator(
        kind=KIND_COMPOSITE,
        apply_fn=apply_fn,
        constants=OperatorConstants(
            C_A=C_A,
            C_c=A.constants.C_c,
            resolution_set=A.constants.resolution_set,
            assumption_flags=A.constants.assumption_flags,
        ),
        is_linear=A.is_linear,
        is_self_adjoint=A.is_self_adjoint,
        domain=A.domain,
        name=f"conv[{','.join(f'{v:g}' for v in h_vec)}]({A.name})",
        root_key=("conv", tuple(h_vec), A.root_key),
    )


# ---------- Sieć ----------

def gnn_forward(params: GnnParams, A: POperator, X: AnySignal) -> List[AnySignal]:
    """
    Przejście w przód sieci; zwraca n_L sygnałów na dziedzinie A.

    :raises DomainError: gdy X nie leży w dziedzinie A
    """
    params.validate()
    A.check_domain(X)
    act = ACTIVATIONS[params.activation]
    features: List[AnySignal] = [X]
    for l, h in enumerate(params.h):
        powers = [_powers(A, x, params.K) for x in features]
        layer = []
        for f in range(h.shape[0]):
            coeffs, signals = [], []
            for g in range(h.shape[1]):
                for k in range(params.K):
                    if h[f, g, k] != 0.0:
                        coeffs.append(h[f, g, k])
                        signals.append(powers[g][k])
            pre = combine(coeffs, signals) if coeffs else A.zero_signal()
            layer.append(map_pointwise(act.fn, pre, range_cap=act.range_cap))
        features = layer
        logger.debug("gnn_forward: layer %d produced %d features", l + 1, len(features))
    return features


def finite_gnn_forward(params: GnnParams, S: np.ndarray, X: np.ndarray) -> List[np.ndarray]:
    """
    Skończona sieć w postaci macierzowej: y_f = ρ(Σ_g Σ_k h_{f,g,k} S^k x_g).

    :param S: macierz operatora przesunięcia (n×n)
    :param X: wartości sygnału wejściowego (n)
    """
    params.validate()
    S = np.asarray(S, dtype=float)
    x = np.asarray(X, dtype=float).reshape(1, -1)
    if S.shape != (x.shape[1], x.shape[1]):
        raise DomainError(f"GSO shape {S.shape} does not match signal length {x.shape[1]}")
    act = ACTIVATIONS[params.activation]
    for h in params.h:
        # z[g, k] = S^k x_g
        z = [x]
        for _ in range(params.K - 1):
            z.append(z[-1] @ S.T)
        z = np.stack(z, axis=1)
        x = act.fn(np.einsum("fgk,gkn->fn", h, z))
    return [row.copy() for row in x]


def composite_lipschitz_constant(params: GnnParams, C_A: float) -> float:
    """Π_l max_f Σ_g Σ_k |h^l_{f,g,k}| C_A^k."""
    scale = C_A ** np.arange(params.K)
    total = 1.0
    for h in params.h:
        total *= float(np.max(np.sum(np.abs(h) * scale[None, None, :], axis=(1, 2))))
    return total


def gnn_as_operator(params: GnnParams, A: POperator) -> POperator:
    """Sieć o jednym wyjściu jako nieliniowy P-operator."""
    params.validate()
    if params.widths[-1] != 1:
        raise PreconditionError(f"operator view needs one output feature, got {params.widths[-1]}")

    def apply_fn(x: AnySignal) -> AnySignal:
        return gnn_forward(params, A, x)[0]

    c_c = A.constants.C_c
    if c_c is None and A.constants.has(FLAG_CONSTANT_TO_CONSTANT):
        c_c = 0.0
    return POperator(
        kind=KIND_GNN,
        apply_fn=apply_fn,
        constants=OperatorConstants(
            C_A=composite_lipschitz_constant(params, A.constants.C_A),
            C_c=c_c,
            resolution_set=A.constants.resolution_set,
            assumption_flags=A.constants.assumption_flags,
        ),
        is_linear=False,
        is_self_adjoint=False,
        domain=A.domain,
        name=f"gnn[{params.fingerprint()}]({A.name})",
        root_key=("gnn", params.fingerprint(), A.root_key),
    )


def gnn_signal_gap(
    params: GnnParams,
    A: POperator,
    n: int,
    X: FiniteSignal,
    C_v: float = 1.0,
    variant: Optional[str] = None,
) -> Tuple[float, BoundReport]:
    """
    ‖extend_pc(Φ(h, A_n, X)) − Φ(h, A, extend_pc(X))‖₂ (maksimum po cechach wyjściowych)
    razem z odpowiadającym mu ograniczeniem.
    """
    from bounds_model import gnn_signal_gap_report

    if A.domain is not None:
        raise DomainError("signal gap compares a continuum operator with its discretization")
    if X.n != n:
        raise DomainError(f"input signal has resolution {X.n}, expected {n}")
    finite_out = gnn_forward(params, discretize(A, n), X)
    continuum_out = gnn_forward(params, A, extend_pc(X))
    gap = max(l2_distance(extend_pc(y), z) for y, z in zip(finite_out, continuum_out))
    report = gnn_signal_gap_report(params, A, n, C_v, variant)
    report.with_measurement(gap)
    return gap, report
