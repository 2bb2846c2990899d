"""
Small shared helpers: logging setup, seeded generators, hashing and provenance
"""

import hashlib
import json
import logging
import platform
import sys
from datetime import datetime
from typing import Any, Dict, Optional

import numpy as np

from resonance_lab import __version__
from resonance_lab.config import settings

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure root logging once for CLI and service use

    Args:
        level: Level name; defaults to LOG_LEVEL, or DEBUG when DEBUG_MODE is set
    """
    if level is None:
        level = "DEBUG" if settings.DEBUG_MODE else settings.LOG_LEVEL
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, force=True)


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    """
    Build the single documented generator (PCG64 via default_rng)

    Args:
        seed: 64-bit seed; DEFAULT_SEED when omitted

    Returns:
        A numpy Generator
    """
    return np.random.default_rng(settings.DEFAULT_SEED if seed is None else seed)


def canonical_json(payload: Any) -> bytes:
    """Serialize with sorted keys and no whitespace so hashes are stable"""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str).encode("utf-8")


def sha256_hex(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload)).hexdigest()


def library_versions() -> Dict[str, str]:
    """Collect versions of the numerical stack for manifests"""
    import pandas
    import pydantic
    import scipy

    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "pandas": pandas.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "resonance_lab": __version__,
    }


def provenance_string(config_hash: str) -> str:
    """
    Build a git-describe style provenance tag

    Returns:
        String like "resonance-lab-1.0.0-g1a2b3c4d@linux-x86_64"
    """
    return f"resonance-lab-{__version__}-g{config_hash[:8]}@{platform.system().lower()}-{platform.machine()}"


def timestamp() -> str:
    return datetime.now().isoformat()
