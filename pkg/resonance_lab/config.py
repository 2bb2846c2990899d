"""
Configuration management for Resonance Lab
Handles environment variables, numerical budgets and run defaults
"""

from typing import Dict
from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    """
    Application settings loaded from environment variables
    All values are validated using Pydantic v2
    """

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # ===== Application Settings =====
    APP_NAME: str = "Resonance Lab"
    APP_VERSION: str = "1.0.0"
    DEBUG_MODE: bool = Field(
        default=False,
        description="Enable debug logging and auto-reload"
    )
    LOG_LEVEL: str = Field(
        default="INFO",
        description="Root log level for CLI and service (DEBUG, INFO, WARNING)"
    )

    # ===== Grid & Memory Budgets =====
    MAX_GRID_POINTS: int = Field(
        default=2 ** 24,
        description="Largest allowed n_per_axis**dim for a Grid"
    )
    FFT_WORKERS: int = Field(
        default=1,
        description="Worker threads handed to scipy.fft"
    )

    # ===== Pseudo-product Quadrature Budgets =====
    BILINEAR_MAX_N_1D: int = Field(
        default=512,
        description="Largest n_per_axis for frequency-side bilinear quadrature in d=1"
    )
    BILINEAR_MAX_N_2D: int = Field(
        default=64,
        description="Largest n_per_axis for frequency-side bilinear quadrature in d=2"
    )
    TRILINEAR_MAX_N_1D: int = Field(
        default=128,
        description="Largest n_per_axis for trilinear quadrature (d=1 only)"
    )
    QUADRATURE_CHUNK_ELEMENTS: int = Field(
        default=2 ** 22,
        description="Symbol evaluations held in memory per output-frequency chunk"
    )
    QUADRATURE_WORKERS: int = Field(
        default=1,
        description="Threads used to evaluate output-frequency chunks"
    )

    # ===== Norm Settings =====
    BOUNDARY_SHELL_FRACTION: float = Field(
        default=0.1,
        description="Outer fraction of the half box treated as the boundary shell"
    )
    BOUNDARY_MASS_TOLERANCE: float = Field(
        default=0.01,
        description="Shell share of weighted mass above which a norm is flagged"
    )
    BANDWIDTH_TOLERANCE: float = Field(
        default=1e-2,
        description="Relative spectral amplitude below which modes are ignored by the reliable-window check"
    )

    # ===== Solver Settings =====
    SMALL_DATA_THRESHOLD: float = Field(
        default=1e-2,
        description="Initial-data size above which the solver warns (small-data regime)"
    )
    ADAPTIVE_CHANGE_TOLERANCE: float = Field(
        default=1e-3,
        description="Relative per-step profile change that triggers step halving"
    )
    BLOWUP_THRESHOLD: float = Field(
        default=1e8,
        description="Profile sup norm treated as blow-up"
    )

    # ===== Diagnostics Settings =====
    SOBOLEV_INDEX: float = Field(
        default=10.0,
        description="Sobolev index of the X-norm high-regularity component"
    )
    XNORM_ALPHA: float = Field(
        default=0.5 + 1.0 / 47.0,
        description="Exponent dividing the cubic moment in the X-norm"
    )

    # ===== Experiment Settings =====
    DEFAULT_SEED: int = Field(
        default=20240917,
        description="Seed used when a study spec does not name one"
    )
    OUTPUT_DIRECTORY: str = Field(
        default="./runs",
        description="Directory receiving per-study output folders"
    )
    STUDY_CONFIG_DIRECTORY: str = Field(
        default="./data/studies",
        description="Directory with the default key=value study configs"
    )

    def bilinear_limit(self, dim: int) -> int:
        """
        Get the bilinear quadrature gate for a dimension

        Returns:
            Largest allowed n_per_axis, 0 when the dimension is not supported
        """
        limits: Dict[int, int] = {1: self.BILINEAR_MAX_N_1D, 2: self.BILINEAR_MAX_N_2D}
        return limits.get(dim, 0)

    def trilinear_limit(self, dim: int) -> int:
        """
        Get the trilinear quadrature gate for a dimension

        Returns:
            Largest allowed n_per_axis, 0 when the dimension is not supported
        """
        return self.TRILINEAR_MAX_N_1D if dim == 1 else 0

    def get_budget_summary(self) -> dict:
        """
        Get the numerical budgets as a plain dictionary

        Returns:
            Dictionary suitable for manifests and the /stats endpoint
        """
        return {
            "max_grid_points": self.MAX_GRID_POINTS,
            "bilinear_max_n": {"1": self.BILINEAR_MAX_N_1D, "2": self.BILINEAR_MAX_N_2D},
            "trilinear_max_n": {"1": self.TRILINEAR_MAX_N_1D},
            "quadrature_chunk_elements": self.QUADRATURE_CHUNK_ELEMENTS,
            "fft_workers": self.FFT_WORKERS,
            "quadrature_workers": self.QUADRATURE_WORKERS,
            "sobolev_index": self.SOBOLEV_INDEX,
            "xnorm_alpha": self.XNORM_ALPHA,
        }


# Create global settings instance
settings = Settings()

# Validate configuration on startup
if min(settings.MAX_GRID_POINTS, settings.QUADRATURE_CHUNK_ELEMENTS,
       settings.FFT_WORKERS, settings.QUADRATURE_WORKERS) <= 0:
    raise ValueError(
        "❌ Numerical budgets must be positive.\n"
        "Check MAX_GRID_POINTS, QUADRATURE_CHUNK_ELEMENTS, FFT_WORKERS and QUADRATURE_WORKERS in your .env file."
    )
if not 0.0 < settings.BOUNDARY_SHELL_FRACTION < 1.0:
    raise ValueError("❌ BOUNDARY_SHELL_FRACTION must lie strictly between 0 and 1.")
