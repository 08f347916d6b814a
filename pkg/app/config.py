from pydantic_settings import BaseSettings
from dotenv import load_dotenv

load_dotenv()

class Settings(BaseSettings):
    # Logging
    log_level: str = "INFO"

    # Simulation guards
    job_limit: int = 100_000

    # Verification defaults
    default_cycles: int = 200
    verify_workers: int = 1

    # Display-only decimal columns in CSV exports
    decimal_places: int = 6

    class Config:
        env_file = ".env"
        env_prefix = "QNET_"
        extra = "ignore"  # This allows extra env vars without errors

settings = Settings()
