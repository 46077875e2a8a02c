# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : settings.py
@Date    : 2026/10/18
"""
import os

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

load_dotenv()


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    threads: int = Field(4, ge=1, description="worker cap for bench and verify")
    dp_limit: int = Field(14, ge=1, description="exact DP box limit")
    structured_limit: int = Field(6, ge=1, description="structured policy enumeration box limit")
    permutation_limit: int = Field(8, ge=1, description="normal-policy permutation sweep box limit")
    reduction_answer_limit: int = Field(3, ge=1, description="largest n for end-to-end partition answers")
    h_precision_bits: int = Field(64, ge=8, description="width of certified exp intervals, in bits")
    log_level: str = Field("WARNING", description="root logging level")


def load_settings() -> Settings:
    """
    Read settings from the environment (and an optional .env file).
    """
    env = {
        "threads": os.getenv("PANDORA_THREADS"),
        "dp_limit": os.getenv("PANDORA_DP_LIMIT"),
        "structured_limit": os.getenv("PANDORA_STRUCTURED_LIMIT"),
        "permutation_limit": os.getenv("PANDORA_PERMUTATION_LIMIT"),
        "reduction_answer_limit": os.getenv("PANDORA_REDUCTION_ANSWER_LIMIT"),
        "h_precision_bits": os.getenv("PANDORA_H_PRECISION_BITS"),
        "log_level": os.getenv("PANDORA_LOG_LEVEL"),
    }
    return Settings(**{k: v for k, v in env.items() if v is not None})


settings = load_settings()
