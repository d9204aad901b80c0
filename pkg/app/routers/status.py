from fastapi import APIRouter

from app import __version__
from app.config import settings

router = APIRouter()


@router.get("/status")
def get_status():
    """Version and the numeric settings every run depends on"""
    return {
        "version": __version__,
        "settings": {
            "log_base": settings.log_base,
            "default_epsilon": settings.default_epsilon,
            "default_c_const": settings.default_c_const,
            "sampler_constant": settings.sampler_constant,
            "sketch_failure": settings.sketch_failure,
            "lp_tolerance": settings.lp_tolerance,
            "exhaustive_seed_limit": settings.exhaustive_seed_limit,
            "cc_partition_limit": settings.cc_partition_limit,
            "maxcut_exact_limit": settings.maxcut_exact_limit,
        },
    }
