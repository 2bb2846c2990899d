"""
Multiplier symbols for the pseudo-product operators and their registry

A symbol is evaluated on broadcastable frequency arrays whose last axis has
length d, plus the time t (t = inf gives the homogeneous limit 1/t = 0).
Denominators follow the resonance quantities:
    A = 1/t + iZ(xi, eta),  C = 1/t + iX(eta, sigma),  B = 1/t + iY(xi, eta, sigma)
"""

import logging
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from resonance_lab.errors import UsageError
from resonance_lab.resonance import (
    grad_eta_phase2,
    p_field,
    phase2,
    y_quantity,
    z_quantity,
)
from resonance_lab.spectral import smooth_step

logger = logging.getLogger(__name__)

# Soft maximum exponent for the three-way partition
SOFT_MAX_POWER = 8.0


class SymbolCategory(str, Enum):
    """Families of registered symbols"""
    BASIC = "basic"
    DUHAMEL = "duhamel"
    NEGATIVE_DEGREE = "negative_degree"
    FLAG = "flag"
    CUTOFF = "cutoff"


class MultiplierSymbol(BaseModel):
    """A bilinear or trilinear Fourier multiplier m(xi, eta[, sigma], t)"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = Field(..., description="Registry name (snake_case)")
    arity: int = Field(..., description="2 for bilinear, 3 for trilinear")
    evaluate: Callable[..., Any] = Field(..., description="fn(xi, eta[, sigma], t) -> complex array")
    homogeneity_degree: Optional[float] = Field(
        default=None, description="Degree in the 1/t = 0 limit, None when not homogeneous"
    )
    description: str = Field(..., description="Formula in words")
    category: SymbolCategory = Field(default=SymbolCategory.BASIC)
    constant: Optional[complex] = Field(default=None, description="Value when m is constant")

    @field_validator("arity")
    @classmethod
    def _check_arity(cls, value: int) -> int:
        if value not in (2, 3):
            raise ValueError(f"arity must be 2 or 3, got {value}")
        return value

    def __call__(self, *freqs, t: float = np.inf) -> np.ndarray:
        if len(freqs) != self.arity:
            raise UsageError(f"symbol '{self.name}' takes {self.arity} frequency arguments, got {len(freqs)}")
        return np.asarray(self.evaluate(*freqs, t), dtype=complex)

    def get_schema(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "arity": self.arity,
            "category": self.category.value,
            "homogeneity_degree": self.homogeneity_degree,
            "description": self.description,
            "constant": None if self.constant is None else [self.constant.real, self.constant.imag],
        }


def _norm(v) -> np.ndarray:
    return np.linalg.norm(np.asarray(v, dtype=float), axis=-1)


def _inverse_time(t: float) -> float:
    return 0.0 if np.isinf(t) else 1.0 / t


def denominator_a(xi, eta, t: float) -> np.ndarray:
    return _inverse_time(t) + 1j * z_quantity(xi, eta, check=False)


def denominator_c(eta, sigma, t: float) -> np.ndarray:
    """X(eta, sigma) is Z evaluated on the inner pair"""
    return _inverse_time(t) + 1j * z_quantity(eta, sigma, check=False)


def denominator_b(xi, eta, sigma, t: float) -> np.ndarray:
    return _inverse_time(t) + 1j * y_quantity(xi, eta, sigma).value


def _log_ratio(top, bottom) -> np.ndarray:
    top, bottom = _norm(top), _norm(bottom)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log2(top) - np.log2(bottom)
    # both zero only at the origin; pick the first family there
    return np.where((top == 0) & (bottom == 0), -np.inf, ratio)


def _pair_partition(ell: np.ndarray) -> np.ndarray:
    """1 for ell <= -1 and 0 for ell >= 1, so supp is inside ell < 1 (ratio < 2)"""
    return 1.0 - smooth_step((ell + 1.0) / 2.0)


def psi1(xi, eta) -> np.ndarray:
    """Vanishes where |eta| >= 2|xi - eta|"""
    return _pair_partition(_log_ratio(eta, np.asarray(xi) - np.asarray(eta)))


def psi2(xi, eta) -> np.ndarray:
    return 1.0 - psi1(xi, eta)


def psi_tilde1(xi, eta) -> np.ndarray:
    """Vanishes where |xi| >= 2|xi - eta|"""
    return _pair_partition(_log_ratio(xi, np.asarray(xi) - np.asarray(eta)))


def psi_tilde2(xi, eta) -> np.ndarray:
    return 1.0 - psi_tilde1(xi, eta)


def phi_partition(xi, eta, sigma) -> List[np.ndarray]:
    """
    Three-way partition by which of |xi-eta|, |eta-sigma|, |sigma| dominates

    Weight i is 1 when its magnitude exceeds half the soft maximum and 0 below a
    quarter of it, so on the support of piece i the other two are at most 4 times it.
    """
    xi, eta, sigma = (np.asarray(v, dtype=float) for v in (xi, eta, sigma))
    mags = [_norm(xi - eta), _norm(eta - sigma), _norm(sigma)]
    soft_max = sum(m ** SOFT_MAX_POWER for m in mags) ** (1.0 / SOFT_MAX_POWER)
    safe = np.where(soft_max > 0, soft_max, 1.0)
    weights = []
    for m in mags:
        with np.errstate(divide="ignore"):
            ell = np.log2(m / safe)
        weights.append(smooth_step(ell + 2.0))
    total = sum(weights)
    origin = soft_max == 0
    out = [np.where(origin, 1.0 / 3.0, w / np.where(total > 0, total, 1.0)) for w in weights]
    return out


def _q4(xi) -> np.ndarray:
    return np.sum(np.asarray(xi, dtype=float) ** 2, axis=-1) ** 2


def monomial_over_a(k: int) -> MultiplierSymbol:
    """Q_k / A with Q_k = xi_1^k, the degree-k member of the negative-degree family"""
    if not 0 <= k <= 4:
        raise UsageError(f"monomial_over_a needs 0 <= k <= 4, got {k}")
    return MultiplierSymbol(
        name=f"Q{k}_monomial_over_A",
        arity=2,
        evaluate=lambda xi, eta, t: np.asarray(xi, dtype=float)[..., 0] ** k / denominator_a(xi, eta, t),
        homogeneity_degree=float(k - 4),
        description=f"xi_1^{k} / (1/t + iZ)",
        category=SymbolCategory.NEGATIVE_DEGREE,
    )


def _build_symbols() -> List[MultiplierSymbol]:
    negative = SymbolCategory.NEGATIVE_DEGREE
    return [
        MultiplierSymbol(
            name="one", arity=2, evaluate=lambda xi, eta, t: np.ones(np.broadcast_shapes(
                np.shape(xi)[:-1], np.shape(eta)[:-1])),
            homogeneity_degree=0.0, description="m = 1 (pointwise product)", constant=1.0,
        ),
        MultiplierSymbol(
            name="duhamel_phase", arity=2,
            evaluate=lambda xi, eta, t: np.exp(1j * t * phase2(xi, eta)),
            description="e^{it phi(xi, eta)}", category=SymbolCategory.DUHAMEL,
        ),
        MultiplierSymbol(
            name="g_symbol", arity=2,
            evaluate=lambda xi, eta, t: np.exp(1j * t * phase2(xi, eta)) / denominator_a(xi, eta, t),
            description="e^{it phi} / (1/t + iZ)", category=SymbolCategory.DUHAMEL,
        ),
        MultiplierSymbol(
            name="fstar_symbol", arity=2,
            evaluate=lambda xi, eta, t: np.exp(1j * phase2(xi, eta)) / denominator_a(xi, eta, 1.0),
            description="e^{i phi} / (1 + iZ), independent of t", category=SymbolCategory.DUHAMEL,
        ),
        MultiplierSymbol(
            name="one_over_A", arity=2, evaluate=lambda xi, eta, t: 1.0 / denominator_a(xi, eta, t),
            homogeneity_degree=-4.0, description="1 / (1/t + iZ)", category=negative,
        ),
        MultiplierSymbol(
            name="one_over_A_squared", arity=2,
            evaluate=lambda xi, eta, t: 1.0 / denominator_a(xi, eta, t) ** 2,
            homogeneity_degree=-8.0, description="1 / (1/t + iZ)^2", category=negative,
        ),
        MultiplierSymbol(
            name="Q4_over_A", arity=2, evaluate=lambda xi, eta, t: _q4(xi) / denominator_a(xi, eta, t),
            homogeneity_degree=0.0, description="|xi|^4 / (1/t + iZ)", category=negative,
        ),
        MultiplierSymbol(
            name="Q6_over_A", arity=2,
            evaluate=lambda xi, eta, t: np.sum(np.asarray(xi, dtype=float) ** 2, axis=-1) * _q4(eta)
            / denominator_a(xi, eta, t),
            homogeneity_degree=2.0, description="|xi|^2 |eta|^4 / (1/t + iZ)", category=negative,
        ),
        MultiplierSymbol(
            name="Q4_over_Z", arity=2,
            evaluate=lambda xi, eta, t: _q4(xi) / z_quantity(xi, eta, check=False),
            homogeneity_degree=0.0, description="|xi|^4 / Z (homogeneous limit of Q4/A up to -i)",
            category=negative,
        ),
        MultiplierSymbol(
            name="cm_normalized_Q4_over_A", arity=2,
            evaluate=lambda xi, eta, t: _q4(xi) / denominator_a(xi, eta, t) * psi1(xi, eta),
            homogeneity_degree=0.0,
            description="|xi|^4 (1/t + |xi-eta|^4)^0 / (1/t + iZ) * Psi_1, t-uniform Coifman-Meyer form",
            category=negative,
        ),
        MultiplierSymbol(
            name="P_dphi_over_A", arity=2,
            evaluate=lambda xi, eta, t: np.sum(p_field(xi, eta) * grad_eta_phase2(xi, eta), axis=-1)
            / denominator_a(xi, eta, t),
            homogeneity_degree=0.0, description="P . grad_eta phi / (1/t + iZ)", category=negative,
        ),
        MultiplierSymbol(
            name="one_over_C", arity=3,
            evaluate=lambda xi, eta, sigma, t: 1.0 / denominator_c(eta, sigma, t) * np.ones(np.shape(xi)[:-1]),
            homogeneity_degree=-4.0, description="1 / (1/t + iX(eta, sigma))", category=SymbolCategory.FLAG,
        ),
        MultiplierSymbol(
            name="flag_A_C", arity=3,
            evaluate=lambda xi, eta, sigma, t: 1.0 / (denominator_a(xi, eta, t) * denominator_c(eta, sigma, t)),
            homogeneity_degree=-8.0, description="1 / (A(xi, eta) C(eta, sigma))", category=SymbolCategory.FLAG,
        ),
        MultiplierSymbol(
            name="flag_A_C_B", arity=3,
            evaluate=lambda xi, eta, sigma, t: 1.0 / (
                denominator_a(xi, eta, t) * denominator_c(eta, sigma, t) * denominator_b(xi, eta, sigma, t)),
            homogeneity_degree=-12.0, description="1 / (A C B) with B = 1/t + iY", category=SymbolCategory.FLAG,
        ),
        MultiplierSymbol(
            name="psi1", arity=2, evaluate=lambda xi, eta, t: psi1(xi, eta), homogeneity_degree=0.0,
            description="Psi_1: supported where |eta| <= 2|xi - eta|", category=SymbolCategory.CUTOFF,
        ),
        MultiplierSymbol(
            name="psi2", arity=2, evaluate=lambda xi, eta, t: psi2(xi, eta), homogeneity_degree=0.0,
            description="Psi_2 = 1 - Psi_1: supported where |xi - eta| <= 2|eta|", category=SymbolCategory.CUTOFF,
        ),
        MultiplierSymbol(
            name="psi_tilde1", arity=2, evaluate=lambda xi, eta, t: psi_tilde1(xi, eta),
            homogeneity_degree=0.0, description="Psi~_1: supported where |xi| <= 2|xi - eta|",
            category=SymbolCategory.CUTOFF,
        ),
        MultiplierSymbol(
            name="psi_tilde2", arity=2, evaluate=lambda xi, eta, t: psi_tilde2(xi, eta),
            homogeneity_degree=0.0, description="Psi~_2 = 1 - Psi~_1", category=SymbolCategory.CUTOFF,
        ),
    ] + [
        MultiplierSymbol(
            name=f"phi{i + 1}", arity=3,
            evaluate=(lambda i: lambda xi, eta, sigma, t: phi_partition(xi, eta, sigma)[i])(i),
            homogeneity_degree=0.0,
            description=f"phi_{i + 1}: piece where {label} dominates",
            category=SymbolCategory.CUTOFF,
        )
        for i, label in enumerate(("|xi - eta|", "|eta - sigma|", "|sigma|"))
    ]


class SymbolRegistry:
    """Registry and lookup of named multiplier symbols"""

    def __init__(self):
        self.symbols: Dict[str, MultiplierSymbol] = {}
        self._initialize_symbols()

    def _initialize_symbols(self) -> None:
        for symbol in _build_symbols():
            self.register_symbol(symbol)

    def register_symbol(self, symbol: MultiplierSymbol) -> None:
        self.symbols[symbol.name] = symbol
        logger.debug("✓ Registered symbol: %s", symbol.name)

    def get_symbol(self, name: str) -> Optional[MultiplierSymbol]:
        return self.symbols.get(name)

    def require(self, name: str) -> MultiplierSymbol:
        """
        Get a symbol by name

        Raises:
            UsageError: If the name is not registered
        """
        symbol = self.get_symbol(name)
        if symbol is None:
            raise UsageError(f"unknown symbol '{name}'; known: {', '.join(self.get_symbol_names())}")
        return symbol

    def get_all_schemas(self) -> List[Dict[str, Any]]:
        return [symbol.get_schema() for symbol in self.symbols.values()]

    def get_symbol_names(self) -> List[str]:
        return list(self.symbols.keys())

    def by_category(self, category: SymbolCategory) -> List[MultiplierSymbol]:
        return [s for s in self.symbols.values() if s.category == category]


# Global registry instance
symbol_registry = SymbolRegistry()
