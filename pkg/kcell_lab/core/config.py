# kcell_lab/core/config.py
from pydantic_settings import BaseSettings
from pydantic import field_validator
from typing import Dict, Any, Optional
from functools import lru_cache
from pathlib import Path
import os


class Settings(BaseSettings):
    """Simulation settings with validation"""

    # Application
    APP_NAME: str = "K-cell Mean Width Lab"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Reproducibility / parallelism
    SEED: Optional[int] = None  # overrides master_seed of every campaign when set
    WORKERS: int = 1

    # Geometry tolerances (length units, bodies are O(1)-scaled)
    GEOMETRY_TOL: float = 1e-9
    MAX_DIMENSION: int = 6

    # Quadrature defaults
    QUAD_UNIFORM_2D: int = 4096
    QUAD_SPHERE_3D: int = 2048
    QUAD_QMC: int = 4096

    # Window / truncation policy
    WINDOW_FACTOR: float = 4.0
    MARK_HEIGHT_FACTOR: float = 2.0  # t_max = MARK_HEIGHT_FACTOR * R
    TRUNCATION_ABORT: float = 0.05
    TRUNCATION_AUDIT: float = 1e-3

    # K[t] evaluation
    KT_RAYS_2D: int = 2048
    KT_RAYS_QMC: int = 1024
    KT_BISECTION_STEPS: int = 60
    MIN_GAIN_STARTS: int = 8

    # Statistics
    KS_EXACT_LIMIT: int = 1000
    CSV_DIGITS: int = 17

    # Output
    OUTPUT_DIR: Path = Path("./results")

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_DIR: Path = Path("./logs")
    LOG_FILE: str = "kcell_lab.log"
    LOG_MAX_SIZE: int = 10 * 1024 * 1024  # 10 MB
    LOG_BACKUP_COUNT: int = 5

    @field_validator("WORKERS")
    @classmethod
    def validate_workers(cls, v):
        return max(1, min(int(v), os.cpu_count() or 1))

    @field_validator("SEED")
    @classmethod
    def validate_seed(cls, v):
        if v is None:
            return v
        if v < 0 or v >= 2**64:
            raise ValueError("SEED must be a 64-bit unsigned integer")
        return v

    @field_validator("MAX_DIMENSION")
    @classmethod
    def validate_max_dimension(cls, v):
        return max(2, min(int(v), 6))

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v):
        v = str(v).upper()
        if v not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            return "INFO"
        return v

    @field_validator("TRUNCATION_ABORT", "TRUNCATION_AUDIT")
    @classmethod
    def validate_fraction(cls, v):
        return max(0.0, min(1.0, float(v)))

    def get_quadrature_config(self) -> Dict[str, Any]:
        """Get quadrature node counts per scheme"""
        return {
            "uniform_2d": self.QUAD_UNIFORM_2D,
            "sphere_3d": self.QUAD_SPHERE_3D,
            "qmc": self.QUAD_QMC,
        }

    def get_window_config(self) -> Dict[str, Any]:
        """Get window and truncation policy"""
        return {
            "window_factor": self.WINDOW_FACTOR,
            "mark_height_factor": self.MARK_HEIGHT_FACTOR,
            "truncation_abort": self.TRUNCATION_ABORT,
            "truncation_audit": self.TRUNCATION_AUDIT,
        }

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = True
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


def describe_settings(logger) -> None:
    """Log configuration block at campaign start"""
    settings = get_settings()

    logger.info("=" * 60)
    logger.info(f"{settings.APP_NAME} v{settings.APP_VERSION}")
    logger.info(f"Workers: {settings.WORKERS}")
    logger.info(f"Seed override: {settings.SEED if settings.SEED is not None else 'none'}")
    logger.info(f"Quadrature: {settings.get_quadrature_config()}")
    logger.info(f"Window policy: {settings.get_window_config()}")
    logger.info("=" * 60)
