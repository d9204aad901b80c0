import logging
from typing import List, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Logging
    log_level: str = "INFO"

    # Numerics
    log_base: str = "e"
    lp_tolerance: float = 1e-7

    # Sampling defaults
    default_epsilon: float = 0.25
    default_c_const: float = 1.0

    # Sketches
    sampler_constant: float = 4.0
    sampler_buckets: int = 64
    sampler_rows: int = 5
    sketch_failure: float = 0.01

    # Streaming
    stream_chunk: int = 4096
    max_samplers: int = 100_000
    countmin_width_factor: int = 4

    # Exhaustive limits
    exhaustive_seed_limit: int = 22
    cc_partition_limit: int = 2_000_000
    maxcut_exact_limit: int = 28

    # Experiments
    workers: int = 1

    # API
    api_host: str = "0.0.0.0"
    api_port: int = 8000
    cors_origins: str = "http://localhost:3000"

    @property
    def cors_origins_list(self) -> List[str]:
        return [origin.strip() for origin in self.cors_origins.split(",")]

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="SUBLINEAR_",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()


def configure_logging(level: Optional[str] = None) -> None:
    """Install the root handler used by the CLI and the dev server"""
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
