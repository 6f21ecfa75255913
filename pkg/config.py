import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    LOG_FORMAT: str = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
    # Logging

    PARETO_DAMPING: float = float(os.getenv("PARETO_DAMPING", "0.5"))
    PARETO_MAX_ITER: int = int(os.getenv("PARETO_MAX_ITER", "10000"))
    PARETO_RESIDUAL_TOL: float = float(os.getenv("PARETO_RESIDUAL_TOL", "1e-12"))
    # Pareto fixed point

    TAU_MAX_ITER: int = int(os.getenv("TAU_MAX_ITER", "80"))
    TAU_TOL: float = float(os.getenv("TAU_TOL", "1e-12"))
    SADDLE_STATIONARITY_TOL: float = float(os.getenv("SADDLE_STATIONARITY_TOL", "1e-7"))
    SADDLE_SCAN_POINTS: int = int(os.getenv("SADDLE_SCAN_POINTS", "160"))
    SADDLE_POLISH_ITER: int = int(os.getenv("SADDLE_POLISH_ITER", "20"))
    SADDLE_BOX_RETRIES: int = int(os.getenv("SADDLE_BOX_RETRIES", "4"))
    # Saddle solver

    TRAIN_TOL: float = float(os.getenv("TRAIN_TOL", "1e-8"))
    TRAIN_MAX_ITER: int = int(os.getenv("TRAIN_MAX_ITER", "200000"))
    # Adversarial training

    DEFAULT_SIGMA: float = float(os.getenv("DEFAULT_SIGMA", "1.0"))
    DEFAULT_V: float = float(os.getenv("DEFAULT_V", "1.0"))
    DEFAULT_EPS_TEST: float = float(os.getenv("DEFAULT_EPS_TEST", "0.5"))
    DEFAULT_P: int = int(os.getenv("DEFAULT_P", "1000"))
    DEFAULT_SEEDS: int = int(os.getenv("DEFAULT_SEEDS", "50"))
    DEFAULT_SEED: int = int(os.getenv("DEFAULT_SEED", "20200101"))
    # Experiment defaults

    MAX_WORKERS: int = int(os.getenv("MAX_WORKERS", str(os.cpu_count() or 1)))
    # Worker pool

    SCHEMA_VERSION: str = "1.0"
    TOOL_VERSION: str = os.getenv("TOOL_VERSION", "0.1.0")
    # Output tables


config = Config()
