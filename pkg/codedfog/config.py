from pydantic_settings import BaseSettings

from codedfog import __version__


class Settings(BaseSettings):
    # Runtime
    ENVIRONMENT: str = "development"
    ARTIFACT_VERSION: str = __version__
    CODEDFOG_SEED: int = 0xC0DEDF06

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "json"  # json | console

    # Monte Carlo
    MC_WORKERS: int = 4
    MC_CHUNK_TRIALS: int = 50_000

    # Coded matmul worker pool
    MAX_CONCURRENT_WORKERS: int = 32
    STRAGGLER_PENALTY_SECONDS: float = 1.0e6
    WALL_CLOCK_SCALE: float = 0.01  # real seconds per model second

    # Erasure codes
    GF256_EXHAUSTIVE_LIMIT: int = 12
    REAL_MDS_RETRIES: int = 8
    REAL_MDS_CHECK_LIMIT: int = 5000
    REAL_CONDITION_THRESHOLD: float = 1.0e10

    # Unified scheme
    FINISHER_SAMPLES: int = 64
    FINISHER_EXHAUSTIVE_LIMIT: int = 1000
    COVERAGE_EXHAUSTIVE_MAX_NODES: int = 10
    UNIFIED_CODE_LIMIT: int = 255
    INDEX_CODING_MAX_CANDIDATES: int = 64
    INDEX_CODING_MAX_SEARCH: int = 200_000  # message sets tried before giving up

    # Output
    FLOAT_DIGITS: int = 12

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"


settings = Settings()
