"""Configuration: env loading and run-level defaults.

Knobs are read from the process environment, with `.env` in the project
root loaded the first time this module is imported (see `.env_sample`).
CLI flags override these values; `RunConfig` is the resolved, validated view
that commands pass around and echo into the event log.

    TSEXP_THREADS            worker threads for replicate fan-out   (1)
    TSEXP_REPLICATES         Monte Carlo draws for the exact test   (1000)
    TSEXP_ALPHA              nominal test level                     (0.05)
    TSEXP_OUTPUT_DIR         default output directory               (runs)
    TSEXP_LOG_LEVEL          root logging level                     (INFO)
    TSEXP_REPLICATE_CHUNK    replicates per work unit               (256)
"""

import logging
import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator


_PROJECT_ROOT = Path(__file__).resolve().parent
load_dotenv(_PROJECT_ROOT / ".env")


def _env(name: str, default: str | None = None, *, required: bool = False) -> str:
    val = os.environ.get(name, default)
    if required and not val:
        raise RuntimeError(f"required env var {name} is not set (check .env)")
    return val or ""


def _env_int(name: str, default: int) -> int:
    raw = _env(name, str(default))
    try:
        return int(raw)
    except ValueError:
        raise RuntimeError(f"env var {name} must be an integer, got {raw!r}") from None


def _env_float(name: str, default: float) -> float:
    raw = _env(name, str(default))
    try:
        return float(raw)
    except ValueError:
        raise RuntimeError(f"env var {name} must be a number, got {raw!r}") from None


THREADS: int = _env_int("TSEXP_THREADS", 1)
REPLICATES: int = _env_int("TSEXP_REPLICATES", 1000)
ALPHA: float = _env_float("TSEXP_ALPHA", 0.05)
OUTPUT_DIR: Path = Path(_env("TSEXP_OUTPUT_DIR", "runs"))
LOG_LEVEL: str = _env("TSEXP_LOG_LEVEL", "INFO").upper()
# Chunk boundaries never depend on THREADS; see parallel.chunk_ranges.
REPLICATE_CHUNK: int = _env_int("TSEXP_REPLICATE_CHUNK", 256)


class RunConfig(BaseModel):
    """Resolved settings for one CLI invocation.

    `stochastic` is set by the CLI for commands that draw random numbers;
    those refuse to run without a seed.
    """

    command: str
    seed: int | None = Field(default=None, ge=0)
    stochastic: bool = False
    threads: int = Field(default_factory=lambda: THREADS, ge=1)
    replicates: int = Field(default_factory=lambda: REPLICATES, ge=1)
    alpha: float = Field(default_factory=lambda: ALPHA, gt=0.0, lt=1.0)
    output_dir: Path = Field(default_factory=lambda: OUTPUT_DIR)
    log_level: str = Field(default_factory=lambda: LOG_LEVEL)
    replicate_chunk: int = Field(default_factory=lambda: REPLICATE_CHUNK, ge=1)

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, v: str) -> str:
        v = v.upper()
        if not isinstance(logging.getLevelName(v), int):
            raise ValueError(f"unknown log level {v!r}")
        return v

    @model_validator(mode="after")
    def _seeded(self) -> "RunConfig":
        if self.stochastic and self.seed is None:
            raise ValueError(f"`{self.command}` draws random numbers and needs --seed")
        return self


def configure_logging(level: str = LOG_LEVEL) -> None:
    """Root logger setup used by run.py; library modules only get loggers."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )
