"""
Spectral core: grids, unitary transforms, dyadic Littlewood-Paley machinery and norms

Conventions:
- Physical lattice x_j = (j - N/2) * L/N along each axis, centered on the origin.
- Frequencies are stored in FFT order, xi_k = 2*pi*k/L for k in [-N/2, N/2).
- Forward transform f_hat = (2*pi)^(-d/2) * dx^d * fftn(ifftshift(f)),
  inverse is its exact inverse, so Plancherel holds with cell weights dx^d and dxi^d.
"""

import json
import logging
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import fft as sfft
from scipy.optimize import minimize

from resonance_lab.config import settings
from resonance_lab.errors import UsageError

logger = logging.getLogger(__name__)

FIELD_FORMAT = "resonance-lab-field"
FIELD_FORMAT_VERSION = 1


class Space(str, Enum):
    """Which side of the Fourier transform a field lives on"""
    PHYSICAL = "physical"
    FREQUENCY = "frequency"


class Direction(str, Enum):
    """Transform direction"""
    FORWARD = "forward"
    INVERSE = "inverse"


class ProjectionMode(str, Enum):
    """Littlewood-Paley projection shape"""
    BAND = "band"
    BELOW = "below"


class CutoffFamily(str, Enum):
    """Dyadic partition used by a projection"""
    SQUARED = "squared"  # sum_j psi_j^2 = 1
    PLAIN = "plain"      # sum_j phi_j = 1


def smooth_step(tau: np.ndarray) -> np.ndarray:
    """
    C-infinity transition from 0 (tau <= 0) to 1 (tau >= 1)

    s(tau) = e^{-1/tau} / (e^{-1/tau} + e^{-1/(1-tau)})
    """
    tau = np.asarray(tau, dtype=float)
    out = np.where(tau >= 1.0, 1.0, 0.0)
    inside = (tau > 0.0) & (tau < 1.0)
    if np.any(inside):
        t = tau[inside]
        # 1 / (1 + e^{1/t - 1/(1-t)}) avoids under/overflow of both exponentials
        with np.errstate(over="ignore"):
            out[inside] = 1.0 / (1.0 + np.exp(1.0 / t - 1.0 / (1.0 - t)))
    return out


class Grid(BaseModel):
    """Periodic box [-L/2, L/2)^d sampled by n_per_axis points per axis"""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1, le=5, description="Spatial dimension d")
    n_per_axis: int = Field(ge=2, description="Points per axis (power of two)")
    box_length: float = Field(gt=0.0, description="Physical period L")

    @field_validator("n_per_axis")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"n_per_axis must be a power of two, got {value}")
        return value

    @model_validator(mode="after")
    def _memory_budget(self) -> "Grid":
        points = self.n_per_axis ** self.dim
        if points > settings.MAX_GRID_POINTS:
            raise ValueError(
                f"grid of {points} points exceeds MAX_GRID_POINTS={settings.MAX_GRID_POINTS}; "
                f"reduce n_per_axis or dim"
            )
        return self

    @classmethod
    def auto_scaled(cls, dim: int, k_max: float, t_max: float,
                    oversampling: float = 1.25, margin: float = 1.1) -> "Grid":
        """
        Smallest power-of-two grid whose reliable window covers t_max

        The box must hold the fastest packet, 4*k_max^3*t_max < L/2, and the
        lattice must resolve k_max with the given oversampling of the Nyquist frequency.

        Args:
            dim: Spatial dimension
            k_max: Largest significant frequency radius of the data
            t_max: Last time that must be wrap-around safe
            oversampling: Required ratio of Nyquist frequency to k_max
            margin: Safety factor on the box length

        Returns:
            Grid satisfying both constraints
        """
        box = max(2.0 * 4.0 * k_max ** 3 * t_max * margin, 2.0 * np.pi / max(k_max, 1e-12))
        box = float(2.0 ** np.ceil(np.log2(box)))
        n_needed = oversampling * k_max * box / np.pi
        n_per_axis = int(2 ** max(1, int(np.ceil(np.log2(max(n_needed, 2.0))))))
        return cls(dim=dim, n_per_axis=n_per_axis, box_length=box)

    @property
    def key(self) -> Tuple[int, int, float]:
        return (self.dim, self.n_per_axis, self.box_length)

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_per_axis

    @property
    def freq_spacing(self) -> float:
        return 2.0 * np.pi / self.box_length

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.n_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def freq_cell_volume(self) -> float:
        return self.freq_spacing ** self.dim

    @property
    def nyquist(self) -> float:
        return np.pi * self.n_per_axis / self.box_length

    @property
    def max_radius(self) -> float:
        """Largest |xi| present on the lattice (the all-Nyquist corner)"""
        return np.sqrt(self.dim) * self.nyquist

    @cached_property
    def axis_x(self) -> np.ndarray:
        return (np.arange(self.n_per_axis) - self.n_per_axis // 2) * self.spacing

    @cached_property
    def axis_offsets(self) -> np.ndarray:
        return np.rint(sfft.fftfreq(self.n_per_axis) * self.n_per_axis).astype(np.int64)

    @cached_property
    def axis_k(self) -> np.ndarray:
        return self.axis_offsets * self.freq_spacing

    @cached_property
    def x_mesh(self) -> List[np.ndarray]:
        return np.meshgrid(*([self.axis_x] * self.dim), indexing="ij", sparse=True)

    @cached_property
    def k_mesh(self) -> List[np.ndarray]:
        return np.meshgrid(*([self.axis_k] * self.dim), indexing="ij", sparse=True)

    @cached_property
    def radius_x(self) -> np.ndarray:
        return np.sqrt(sum(x ** 2 for x in self.x_mesh))

    @cached_property
    def k_squared(self) -> np.ndarray:
        return np.asarray(sum(k ** 2 for k in self.k_mesh), dtype=float) * np.ones(self.shape)

    @cached_property
    def k_abs(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @cached_property
    def k_fourth(self) -> np.ndarray:
        return self.k_squared ** 2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep offsets with |k_i| <= N/3 on every axis"""
        keep = np.abs(self.axis_offsets) <= self.n_per_axis // 3
        masks = np.meshgrid(*([keep] * self.dim), indexing="ij", sparse=True)
        out = np.ones(self.shape, dtype=bool)
        for m in masks:
            out = out & m
        return out

    def lattice_frequencies(self) -> np.ndarray:
        """All lattice frequencies as an (N^d, d) array in flat C order"""
        return self.lattice_offsets().astype(float) * self.freq_spacing

    def lattice_offsets(self) -> np.ndarray:
        """Integer offsets k as an (N^d, d) array in flat C order"""
        mesh = np.meshgrid(*([self.axis_offsets] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def lattice_positions(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis_x] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def reliable_time(self, k_max: float) -> float:
        """Latest time with 4*k_max^3*t < L/2"""
        if k_max <= 0:
            return np.inf
        return self.box_length / (8.0 * k_max ** 3)


class SpectralField(BaseModel):
    """Complex values over a Grid, tagged with the space they live in"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    values: np.ndarray
    space: Space

    @field_validator("values", mode="before")
    @classmethod
    def _as_complex(cls, value) -> np.ndarray:
        return np.array(value, dtype=np.complex128, copy=True)

    @model_validator(mode="after")
    def _check_shape(self) -> "SpectralField":
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        self.values.setflags(write=False)
        return self

    @classmethod
    def physical(cls, grid: Grid, values) -> "SpectralField":
        return cls(grid=grid, values=values, space=Space.PHYSICAL)

    @classmethod
    def frequency_field(cls, grid: Grid, values) -> "SpectralField":
        return cls(grid=grid, values=values, space=Space.FREQUENCY)

    @classmethod
    def zeros(cls, grid: Grid, space: Space = Space.FREQUENCY) -> "SpectralField":
        return cls(grid=grid, values=np.zeros(grid.shape), space=space)

    def with_values(self, values) -> "SpectralField":
        return SpectralField(grid=self.grid, values=values, space=self.space)

    def to_frequency(self) -> "SpectralField":
        return self if self.space == Space.FREQUENCY else transform(self, Direction.FORWARD)

    def to_physical(self) -> "SpectralField":
        return self if self.space == Space.PHYSICAL else transform(self, Direction.INVERSE)

    def l2_norm(self) -> float:
        weight = self.grid.cell_volume if self.space == Space.PHYSICAL else self.grid.freq_cell_volume
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * weight))

    def _combine(self, other: "SpectralField") -> "SpectralField":
        if other.grid.key != self.grid.key:
            raise UsageError("fields live on different grids")
        return other if other.space == self.space else (
            other.to_frequency() if self.space == Space.FREQUENCY else other.to_physical()
        )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return self.with_values(self.values + self._combine(other).values)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self.with_values(self.values - self._combine(other).values)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


class WeightedNorm(BaseModel):
    """Result of a weighted Lebesgue norm with its box-truncation diagnostics"""
    value: float = Field(description="Norm value")
    boundary_fraction: float = Field(description="Share of the weighted mass inside the boundary shell")
    boundary_flagged: bool = Field(description="True when the box truncates the weighted tail")


def transform(field: SpectralField, direction: Direction) -> SpectralField:
    """
    Unitary discrete Fourier transform between physical and frequency space

    Args:
        field: Input field, tagged with the source space of the direction
        direction: FORWARD (physical -> frequency) or INVERSE

    Returns:
        Field tagged with the target space

    Raises:
        UsageError: If the field is not in the source space of the direction
    """
    grid = field.grid
    d = grid.dim
    direction = Direction(direction)
    if direction == Direction.FORWARD:
        if field.space != Space.PHYSICAL:
            raise UsageError("forward transform expects a physical-space field")
        values = sfft.fftn(sfft.ifftshift(field.values), workers=settings.FFT_WORKERS)
        values *= (2.0 * np.pi) ** (-d / 2.0) * grid.cell_volume
        return SpectralField(grid=grid, values=values, space=Space.FREQUENCY)

    if field.space != Space.FREQUENCY:
        raise UsageError("inverse transform expects a frequency-space field")
    values = sfft.fftshift(sfft.ifftn(field.values, workers=settings.FFT_WORKERS))
    values *= grid.size * grid.freq_cell_volume * (2.0 * np.pi) ** (-d / 2.0)
    return SpectralField(grid=grid, values=values, space=Space.PHYSICAL)


def gaussian_field(grid: Grid, width: float = 1.0, amplitude: float = 1.0,
                   normalized: bool = False, center: Optional[List[float]] = None) -> SpectralField:
    """
    Physical Gaussian amplitude * exp(-|x - center|^2 / (2 width^2))

    Args:
        normalized: Rescale to unit L2 norm before applying amplitude
    """
    center = center or [0.0] * grid.dim
    r2 = sum((x - c) ** 2 for x, c in zip(grid.x_mesh, center))
    values = np.exp(-r2 / (2.0 * width ** 2)) * np.ones(grid.shape)
    field = SpectralField.physical(grid, values)
    if normalized:
        field = field * (1.0 / field.l2_norm())
    return field * amplitude


def random_smooth_field(grid: Grid, rng: np.random.Generator, bandwidth: float = 1.0,
                        amplitude: float = 1.0) -> SpectralField:
    """
    Seeded random field: complex normal spectrum under a Gaussian envelope of width bandwidth

    Returns:
        Frequency-space field with unit L2 norm times amplitude
    """
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    field = SpectralField.frequency_field(grid, noise * np.exp(-grid.k_squared / (2.0 * bandwidth ** 2)))
    return field * (amplitude / field.l2_norm())


def dc_component(field: SpectralField) -> complex:
    """Frequency-space value at xi = 0, which belongs to no dyadic band"""
    return complex(field.to_frequency().values[(0,) * field.grid.dim])


def _bump(r: np.ndarray) -> np.ndarray:
    """Raw radial bump: rises on [3/4, 1], equals 1 on [1, 2], falls on [2, 8/3]"""
    rise = smooth_step((r - 0.75) / 0.25)
    fall = 1.0 - smooth_step((r - 2.0) / (2.0 / 3.0))
    return rise * fall


class DyadicFamily(BaseModel):
    """
    Dyadic partitions of unity on a grid's frequency lattice

    psi satisfies sum_j psi(xi/2^j)^2 = 1 and phi satisfies sum_j phi(xi/2^j) = 1
    for xi != 0; both are supported in 3/4 < |xi|/2^j < 8/3.
    """

    model_config = ConfigDict(frozen=True)

    grid: Grid

    @property
    def j_min(self) -> int:
        return int(np.floor(np.log2(3.0 * self.grid.freq_spacing / 8.0))) + 1

    @property
    def j_max(self) -> int:
        return int(np.ceil(np.log2(4.0 * self.grid.max_radius / 3.0))) - 1

    @property
    def bands(self) -> range:
        return range(self.j_min, self.j_max + 1)

    @cached_property
    def _sums(self) -> Tuple[np.ndarray, np.ndarray]:
        r = self.grid.k_abs
        square_sum = np.zeros(self.grid.shape)
        plain_sum = np.zeros(self.grid.shape)
        for j in range(self.j_min - 2, self.j_max + 3):
            b = _bump(r / 2.0 ** j)
            square_sum += b ** 2
            plain_sum += b
        return square_sum, plain_sum

    def psi(self, j: int) -> np.ndarray:
        square_sum, _ = self._sums
        b = _bump(self.grid.k_abs / 2.0 ** j)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(square_sum > 0, b / np.sqrt(square_sum), 0.0)

    def phi(self, j: int) -> np.ndarray:
        _, plain_sum = self._sums
        b = _bump(self.grid.k_abs / 2.0 ** j)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(plain_sum > 0, b / plain_sum, 0.0)

    def cutoff(self, j: int, family: CutoffFamily = CutoffFamily.SQUARED) -> np.ndarray:
        return self.psi(j) if CutoffFamily(family) == CutoffFamily.SQUARED else self.phi(j)

    def below(self, j: int, family: CutoffFamily = CutoffFamily.SQUARED) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        for k in range(self.j_min, min(j, self.j_max) + 1):
            out += self.cutoff(k, family)
        return out


def lp_project(field: SpectralField, j: int, mode: ProjectionMode = ProjectionMode.BAND,
               family: CutoffFamily = CutoffFamily.SQUARED) -> SpectralField:
    """
    Littlewood-Paley projection P_j (band) or P_{<=j} (below)

    Band mode multiplies by psi_j (squared family) or phi_j (plain family);
    below mode multiplies by the sum of the band cutoffs up to j.
    The DC mode is never kept.

    Returns:
        Frequency-space field; a zero field (with a warning) when j is not representable
    """
    fhat = field.to_frequency()
    family_obj = DyadicFamily(grid=field.grid)
    mode = ProjectionMode(mode)
    empty = j < family_obj.j_min or (mode == ProjectionMode.BAND and j > family_obj.j_max)
    if empty:
        logger.warning("⚠️ band j=%d outside representable range [%d, %d]; returning zero field",
                       j, family_obj.j_min, family_obj.j_max)
        return SpectralField.zeros(field.grid)
    mask = family_obj.cutoff(j, family) if mode == ProjectionMode.BAND else family_obj.below(j, family)
    return fhat.with_values(fhat.values * mask)


def _shell_mask(grid: Grid) -> np.ndarray:
    edge = 0.5 * grid.box_length * (1.0 - settings.BOUNDARY_SHELL_FRACTION)
    out = np.zeros(grid.shape, dtype=bool)
    for x in grid.x_mesh:
        out = out | (np.abs(x) > edge)
    return out


def weighted_norm(field: SpectralField, weight_power: int, p: float = 2.0) -> WeightedNorm:
    """
    Weighted Lebesgue norm || |x|^k f ||_p by lattice quadrature

    Args:
        field: Field (transformed to physical space if needed)
        weight_power: k in 0..3
        p: Exponent in [1, inf]

    Returns:
        WeightedNorm with the boundary-shell diagnostics
    """
    if not 0 <= weight_power <= 3:
        raise UsageError(f"weight_power must be in 0..3, got {weight_power}")
    if p < 1:
        raise UsageError(f"p must be >= 1, got {p}")
    grid = field.grid
    u = field.to_physical()
    density = np.abs(u.values) * (grid.radius_x ** weight_power if weight_power else 1.0)
    shell = _shell_mask(grid)
    if np.isinf(p):
        value = float(density.max())
        shell_value = float(density[shell].max()) if shell.any() else 0.0
        fraction = shell_value / value if value > 0 else 0.0
    else:
        powered = density ** p
        total = float(powered.sum())
        value = (total * grid.cell_volume) ** (1.0 / p)
        fraction = float(powered[shell].sum()) / total if total > 0 else 0.0
    return WeightedNorm(
        value=value,
        boundary_fraction=fraction,
        boundary_flagged=fraction > settings.BOUNDARY_MASS_TOLERANCE,
    )


def lp_norm(field: SpectralField, p: float) -> float:
    return weighted_norm(field, 0, p).value


def sobolev_norm(field: SpectralField, s: float) -> float:
    """
    ||<xi>^s f_hat||_2 with <xi> = (1 + |xi|^2)^(1/2)

    The weight is applied in log space and rescaled by its maximum so large s
    on coarse grids does not overflow before the sum.
    """
    if s < 0:
        raise UsageError(f"Sobolev index must be >= 0, got {s}")
    fhat = field.to_frequency()
    grid = field.grid
    log_weight = 0.5 * s * np.log1p(grid.k_squared)
    peak = float(log_weight.max())
    scaled = np.sum(np.exp(2.0 * (log_weight - peak)) * np.abs(fhat.values) ** 2) * grid.freq_cell_volume
    if peak > 700.0:
        logger.warning("⚠️ Sobolev weight <xi>^%g overflows on this grid; returning inf", s)
        return float("inf")
    return float(np.exp(peak) * np.sqrt(scaled))


def band_limited_value(fhat: SpectralField, x: np.ndarray, modes: Optional[np.ndarray] = None) -> complex:
    """Evaluate the trigonometric interpolant of a frequency field at an off-lattice point"""
    coefficients, xi = _interpolant_terms(fhat, modes)
    return complex(np.sum(coefficients * np.exp(1j * (xi @ np.asarray(x, dtype=float)))))


def _interpolant_terms(fhat: SpectralField, modes: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    grid = fhat.grid
    coefficients = fhat.values.ravel() * grid.freq_cell_volume * (2.0 * np.pi) ** (-grid.dim / 2.0)
    xi = grid.lattice_frequencies()
    if modes is not None:
        coefficients, xi = coefficients[modes], xi[modes]
    return coefficients, xi


def sup_norm(field: SpectralField, refine: bool = False) -> float:
    """
    Sup norm of the physical field

    With refine=True the lattice maximum is polished by maximizing the
    band-limited interpolant around it (Nelder-Mead over significant modes).
    """
    u = field.to_physical()
    lattice_max = float(np.abs(u.values).max())
    if not refine or lattice_max == 0.0:
        return lattice_max
    fhat = field.to_frequency()
    grid = field.grid
    flat = np.abs(fhat.values.ravel())
    modes = np.nonzero(flat > 1e-10 * flat.max())[0]
    coefficients, xi = _interpolant_terms(fhat, modes)
    start = np.array(np.unravel_index(np.argmax(np.abs(u.values)), grid.shape), dtype=float)
    x0 = (start - grid.n_per_axis // 2) * grid.spacing
    result = minimize(
        lambda x: -abs(np.sum(coefficients * np.exp(1j * (xi @ x)))) ** 2,
        x0,
        method="Nelder-Mead",
        options={"xatol": 1e-3 * grid.spacing, "fatol": 1e-14, "maxiter": 200 * grid.dim},
    )
    return max(lattice_max, float(np.sqrt(-result.fun)))


def measure_bernstein_constant(grid: Grid, j: int, p: float, q: float, samples: int,
                               rng: np.random.Generator) -> float:
    """
    Brute-force the constant in ||P_{<=j} f||_q <= C 2^{dj(1/p - 1/q)} ||f||_p

    Fields are random complex spectra restricted to |xi| <= 2^(j+2), projected with the plain family.

    Returns:
        Largest observed ratio
    """
    support = grid.k_abs <= 2.0 ** (j + 2)
    scale = 2.0 ** (grid.dim * j * (1.0 / p - 1.0 / q))
    worst = 0.0
    for _ in range(samples):
        spectrum = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * support
        f = SpectralField.frequency_field(grid, spectrum)
        projected = lp_project(f, j, ProjectionMode.BELOW, CutoffFamily.PLAIN)
        ratio = lp_norm(projected, q) / (scale * lp_norm(f, p))
        worst = max(worst, ratio)
    return worst


def save_field(field: SpectralField, path: Union[str, Path]) -> Path:
    """
    Write a field as a JSON header line followed by little-endian complex64 values

    Returns:
        Path written
    """
    path = Path(path)
    header = {
        "format": FIELD_FORMAT,
        "version": FIELD_FORMAT_VERSION,
        "dim": field.grid.dim,
        "n_per_axis": field.grid.n_per_axis,
        "box_length": field.grid.box_length,
        "space": field.space.value,
        "dtype": "<c8",
    }
    with path.open("wb") as handle:
        handle.write(json.dumps(header).encode("utf-8") + b"\n")
        handle.write(np.ascontiguousarray(field.values, dtype="<c8").tobytes())
    return path


def load_field(path: Union[str, Path]) -> SpectralField:
    """
    Read a field written by save_field

    Raises:
        FileNotFoundError: If the file does not exist
        UsageError: If the header is malformed or disagrees with the payload size
    """
    path = Path(path)
    with path.open("rb") as handle:
        header_line = handle.readline()
        payload = handle.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise UsageError(f"❌ {path} has no readable field header") from exc
    if header.get("format") != FIELD_FORMAT or header.get("dtype") != "<c8":
        raise UsageError(f"❌ {path} is not a {FIELD_FORMAT} file")
    for key in ("dim", "n_per_axis", "box_length", "space"):
        if key not in header:
            raise UsageError(f"❌ {path} header lacks '{key}'")
    grid = Grid(dim=header["dim"], n_per_axis=header["n_per_axis"], box_length=header["box_length"])
    values = np.frombuffer(payload, dtype="<c8")
    if values.size != grid.size:
        raise UsageError(f"❌ {path} holds {values.size} values, header implies {grid.size}")
    return SpectralField(grid=grid, values=values.reshape(grid.shape), space=Space(header["space"]))
