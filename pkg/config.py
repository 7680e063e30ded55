# ~/dirkde/config.py
import os
import logging

from dotenv import load_dotenv

from errors import ConfigError

# Load .env, but allow it to override anything inherited from the shell
load_dotenv(override=True)

VERSION = "0.1.0"

logger = logging.getLogger("dirkde.config")


def _env_int(name: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(name, "").strip()
    # quotes around values are a common mistake in .env
    if (raw.startswith('"') and raw.endswith('"')) or (raw.startswith("'") and raw.endswith("'")):
        raw = raw[1:-1].strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


LOG_LEVEL = (os.getenv("DIRKDE_LOG_LEVEL", "INFO").strip() or "INFO").upper()
WORKERS = _env_int("DIRKDE_WORKERS", min(8, os.cpu_count() or 1))
GRID_RES_Q1 = _env_int("DIRKDE_GRID_RES_Q1", 128, minimum=8)
GRID_RES_Q2 = _env_int("DIRKDE_GRID_RES_Q2", 64, minimum=8)
GRID_RES_Q3 = _env_int("DIRKDE_GRID_RES_Q3", 24, minimum=8)
LINE_RES = _env_int("DIRKDE_LINE_RES", 256, minimum=16)
REPLICATES = _env_int("DIRKDE_REPLICATES", 500, minimum=2)
SEED = _env_int("DIRKDE_SEED", 1, minimum=0)


def default_grid_res(q: int) -> int:
    """Sphere grid resolution used when --grid-res is not given."""
    return {1: GRID_RES_Q1, 2: GRID_RES_Q2, 3: GRID_RES_Q3}.get(q, GRID_RES_Q3)


def configure_logging(level: str | None = None) -> None:
    """Root handler for CLI runs; library modules only create loggers."""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL), logging.INFO),
        format="[%(name)s] %(message)s",
    )
    logger.debug(f"workers={WORKERS} grid_res=({GRID_RES_Q1},{GRID_RES_Q2},{GRID_RES_Q3}) line_res={LINE_RES}")
