"""
Resonance geometry of the quadratic and cubic interactions

All functions are vectorized: frequency arguments are arrays whose last axis
has length d (a single FreqPoint is a 1-D array of length d).
"""

import logging
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from resonance_lab.errors import ConsistencyError, UsageError
from resonance_lab.utils import make_rng

logger = logging.getLogger(__name__)

# Coefficient of |eta|^2 |xi|^2 implied by phi + P . grad_eta phi
Z_MIXED_COEFFICIENT = 14.0 / 5.0
# Value printed next to the expansion; kept only to measure how far it is off
Z_PRINTED_MIXED_COEFFICIENT = 15.0 / 4.0
Z_DUAL_TOLERANCE = 1e-9
AUDIT_CHUNK = 10_000


class YEvaluation(NamedTuple):
    """Y together with its margin over 4(|xi-eta|^4 + |eta-sigma|^4 + |sigma|^4)"""
    value: np.ndarray
    margin: np.ndarray


class ResonanceAudit(BaseModel):
    """Outcome of a sampled audit of one resonance claim"""
    name: str = Field(description="Audited claim")
    dim: int = Field(description="Dimension d")
    sample_count: int = Field(description="Points sampled")
    min_margin: float = Field(description="Smallest margin over the samples")
    violation_count: int = Field(description="Samples with negative margin")
    worst_point: List[List[float]] = Field(description="Frequencies attaining the smallest margin")
    max_consistency_error: Optional[float] = Field(
        default=None, description="Largest relative disagreement of a dual computation"
    )
    notes: str = Field(default="", description="Free-form remarks")

    @property
    def passed(self) -> bool:
        return self.violation_count == 0


def _points(*args) -> List[np.ndarray]:
    arrays = [np.asarray(a, dtype=float) for a in args]
    dims = {a.shape[-1] if a.ndim else 1 for a in arrays}
    if len(dims) != 1:
        raise UsageError(f"frequency arguments have mismatched dimensions {sorted(dims)}")
    return [a if a.ndim else a.reshape(1) for a in arrays]


def _sq(v: np.ndarray) -> np.ndarray:
    return np.sum(v * v, axis=-1)


def _dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sum(u * v, axis=-1)


def phase2(xi, eta) -> np.ndarray:
    """phi(xi, eta) = |xi|^4 - |eta|^4 - |xi - eta|^4"""
    xi, eta = _points(xi, eta)
    return _sq(xi) ** 2 - _sq(eta) ** 2 - _sq(xi - eta) ** 2


def grad_eta_phase2(xi, eta) -> np.ndarray:
    xi, eta = _points(xi, eta)
    w = xi - eta
    return 4.0 * _sq(w)[..., None] * w - 4.0 * _sq(eta)[..., None] * eta


def p_field(xi, eta) -> np.ndarray:
    xi, eta = _points(xi, eta)
    return -eta + xi / 5.0


def z_expanded(xi, eta, mixed_coefficient: float = Z_MIXED_COEFFICIENT) -> np.ndarray:
    """Z as an explicit polynomial in |eta|^2, |xi|^2 and eta.xi"""
    xi, eta = _points(xi, eta)
    a, b, c = _sq(eta), _sq(xi), _dot(eta, xi)
    return (6.0 * a ** 2 + 0.8 * b ** 2 + 5.6 * c ** 2
            - 9.6 * a * c - 2.4 * b * c + mixed_coefficient * a * b)


def z_quantity(xi, eta, check: bool = True) -> np.ndarray:
    """
    Z = phi + P . grad_eta phi, cross-checked against the expanded polynomial

    Raises:
        ConsistencyError: If the two computations disagree beyond 1e-9 relative
    """
    xi, eta = _points(xi, eta)
    direct = phase2(xi, eta) + _dot(p_field(xi, eta), grad_eta_phase2(xi, eta))
    if check:
        scale = (_sq(xi) + _sq(eta)) ** 2
        error = np.abs(direct - z_expanded(xi, eta)) / np.maximum(scale, np.finfo(float).tiny)
        worst = float(np.max(error)) if error.size else 0.0
        if worst > Z_DUAL_TOLERANCE:
            raise ConsistencyError(f"Z dual computation disagrees by {worst:.3e} relative")
    return direct


def completed_square_value(xi, eta) -> np.ndarray:
    """
    The completed-square form printed beside the expansion, with a^2 = 12/sqrt(30)
    and b^2 = 3/sqrt(30) taken as the coefficients of eta and xi in the square
    """
    xi, eta = _points(xi, eta)
    a2, b2 = 12.0 / np.sqrt(30.0), 3.0 / np.sqrt(30.0)
    ab = np.sqrt(a2 * b2)
    a, b, c = _sq(eta), _sq(xi), _dot(eta, xi)
    square = (a2 * a - 2.0 * ab * c + b2 * b) ** 2
    return square + 1.2 * a ** 2 + 0.5 * b ** 2 + 0.8 * c ** 2 + 0.4 * a * b


def completed_square_discrepancy(samples: int = 1000, dim: int = 2,
                                 rng: Optional[np.random.Generator] = None) -> float:
    """Largest relative gap between the completed-square form and Z on the unit sphere"""
    xi, eta = _sphere(rng or make_rng(), samples, dim, 2)
    z = z_quantity(xi, eta, check=False)
    return float(np.max(np.abs(completed_square_value(xi, eta) - z)))


def phase3(xi, eta, sigma) -> np.ndarray:
    """psi(xi, eta, sigma) = |xi|^4 - |xi-eta|^4 - |eta-sigma|^4 - |sigma|^4"""
    xi, eta, sigma = _points(xi, eta, sigma)
    return _sq(xi) ** 2 - _sq(xi - eta) ** 2 - _sq(eta - sigma) ** 2 - _sq(sigma) ** 2


def grad_eta_phase3(xi, eta, sigma) -> np.ndarray:
    xi, eta, sigma = _points(xi, eta, sigma)
    u, v = xi - eta, eta - sigma
    return 4.0 * _sq(u)[..., None] * u - 4.0 * _sq(v)[..., None] * v


def grad_sigma_phase3(xi, eta, sigma) -> np.ndarray:
    xi, eta, sigma = _points(xi, eta, sigma)
    v = eta - sigma
    return 4.0 * _sq(v)[..., None] * v - 4.0 * _sq(sigma)[..., None] * sigma


def q_field(xi, eta) -> np.ndarray:
    xi, eta = _points(xi, eta)
    return 2.0 * xi - 3.0 * eta


def s_field(xi, sigma) -> np.ndarray:
    xi, sigma = _points(xi, sigma)
    return xi - 3.0 * sigma


def y_quantity(xi, eta, sigma) -> YEvaluation:
    """Y = psi + Q . psi_eta + S . psi_sigma with its lower-bound margin"""
    xi, eta, sigma = _points(xi, eta, sigma)
    value = (phase3(xi, eta, sigma)
             + _dot(q_field(xi, eta), grad_eta_phase3(xi, eta, sigma))
             + _dot(s_field(xi, sigma), grad_sigma_phase3(xi, eta, sigma)))
    bound = 4.0 * (_sq(xi - eta) ** 2 + _sq(eta - sigma) ** 2 + _sq(sigma) ** 2)
    return YEvaluation(value=value, margin=value - bound)


def x_quantity(eta, sigma) -> np.ndarray:
    """X(eta, sigma) = phi(eta, sigma) + P(eta, sigma) . grad phi, i.e. Z in the inner pair"""
    return z_quantity(eta, sigma)


def phase_hessian(xi) -> np.ndarray:
    """Exact Hessian of |xi|^4: 4|xi|^2 I + 8 xi xi^T, shape (..., d, d)"""
    (xi,) = _points(xi)
    d = xi.shape[-1]
    return 4.0 * _sq(xi)[..., None, None] * np.eye(d) + 8.0 * xi[..., :, None] * xi[..., None, :]


def _sphere(rng: np.random.Generator, samples: int, dim: int, blocks: int) -> Tuple[np.ndarray, ...]:
    """Uniform samples of the unit sphere in R^(blocks*dim), split into frequency blocks"""
    v = rng.standard_normal((samples, blocks * dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return tuple(v[:, i * dim:(i + 1) * dim] for i in range(blocks))


def _run_audit(name: str, dim: int, total: int, draw: Callable[[int], Tuple[np.ndarray, ...]],
               margin: Callable[..., Tuple[np.ndarray, float]], tolerance: float = 0.0) -> ResonanceAudit:
    """Chunked map-reduce over samples keeping the smallest margin"""
    best, worst_point, violations, consistency = np.inf, [], 0, 0.0
    done = 0
    while done < total:
        count = min(AUDIT_CHUNK, total - done)
        points = draw(count)
        values, error = margin(*points)
        consistency = max(consistency, error)
        violations += int(np.sum(values < tolerance))
        i = int(np.argmin(values))
        if values[i] < best:
            best = float(values[i])
            worst_point = [p[i].tolist() for p in points]
        done += count
    audit = ResonanceAudit(
        name=name, dim=dim, sample_count=total, min_margin=best,
        violation_count=violations, worst_point=worst_point,
        max_consistency_error=consistency,
    )
    marker = "✓" if audit.passed else "❌"
    logger.info("%s %s d=%d: min margin %.4g over %d samples", marker, name, dim, best, total)
    return audit


def _z_margin(xi: np.ndarray, eta: np.ndarray) -> Tuple[np.ndarray, float]:
    direct = z_quantity(xi, eta, check=False)
    scale = (_sq(xi) + _sq(eta)) ** 2
    error = float(np.max(np.abs(direct - z_expanded(xi, eta)) / scale))
    return direct - 0.5 * (_sq(xi) ** 2 + _sq(eta) ** 2), error


def audit_z_lower_bound(dim: int, samples: int, rng: Optional[np.random.Generator] = None) -> ResonanceAudit:
    """Sample Z - (|xi|^4 + |eta|^4)/2 on the unit sphere of (xi, eta)"""
    rng = rng or make_rng()
    return _run_audit("z_lower_bound", dim, samples,
                      lambda n: _sphere(rng, n, dim, 2), _z_margin)


def audit_trilinear_bounds(dim: int, samples: int,
                           rng: Optional[np.random.Generator] = None) -> Tuple[ResonanceAudit, ResonanceAudit]:
    """
    Audit the lower bounds of Y and X on the unit sphere of (xi, eta, sigma)

    Returns:
        (Y audit, X audit)
    """
    rng = rng or make_rng()

    def y_margin(xi, eta, sigma):
        return y_quantity(xi, eta, sigma).margin, 0.0

    def x_margin(eta, sigma):
        value = x_quantity(eta, sigma)
        scale = (_sq(eta) + _sq(sigma)) ** 2
        error = float(np.max(np.abs(value - z_expanded(eta, sigma)) / scale))
        return value - 0.5 * (_sq(eta) ** 2 + _sq(sigma) ** 2), error

    y_audit = _run_audit("y_lower_bound", dim, samples, lambda n: _sphere(rng, n, dim, 3), y_margin)
    x_audit = _run_audit("x_lower_bound", dim, samples, lambda n: _sphere(rng, n, dim, 2), x_margin)
    return y_audit, x_audit


def audit_resonance_sets(dim: int, sample_budget: int,
                         rng: Optional[np.random.Generator] = None) -> ResonanceAudit:
    """
    Check that time and space resonances meet only at the origin

    Samples the unit sphere of (xi, eta) and records min |phi| + |grad_eta phi|.
    In d=1 the sphere is a circle and is swept deterministically in angle.

    Raises:
        UsageError: If sample_budget < 10^4
    """
    if sample_budget < 10 ** 4:
        raise UsageError(f"sample_budget must be at least 1e4, got {sample_budget}")
    rng = rng or make_rng()

    if dim == 1:
        cursor = [0]

        def draw(count: int) -> Tuple[np.ndarray, np.ndarray]:
            theta = 2.0 * np.pi * np.arange(cursor[0], cursor[0] + count) / sample_budget
            cursor[0] += count
            return np.cos(theta)[:, None], np.sin(theta)[:, None]
    else:
        def draw(count: int) -> Tuple[np.ndarray, np.ndarray]:
            return _sphere(rng, count, dim, 2)

    def joint(xi, eta):
        return np.abs(phase2(xi, eta)) + np.linalg.norm(grad_eta_phase2(xi, eta), axis=-1), 0.0

    audit = _run_audit("space_time_resonance", dim, sample_budget, draw, joint, tolerance=1e-12)
    return audit.model_copy(update={"notes": "margin is |phi| + |grad_eta phi| on the unit sphere"})


def sample_homogeneity_error(fn: Callable[..., np.ndarray], degree: float, dim: int, arity: int,
                             samples: int = 100, rng: Optional[np.random.Generator] = None) -> float:
    """Largest relative error of fn(a*args) = a^degree fn(args) on random samples"""
    rng = rng or make_rng()
    args: Sequence[np.ndarray] = [rng.standard_normal((samples, dim)) for _ in range(arity)]
    scale = rng.uniform(0.5, 3.0, size=(samples,))
    base = np.asarray(fn(*args))
    scaled = np.asarray(fn(*[a * scale[:, None] for a in args]))
    factor = scale ** degree
    if base.ndim > 1:
        factor = factor[:, None]
    reference = np.maximum(np.abs(base * factor), 1e-300)
    return float(np.max(np.abs(scaled - base * factor) / reference))
