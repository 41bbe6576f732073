"""Application startup validation."""
import logging

from app.settings import settings

logger = logging.getLogger(__name__)


def validate_settings() -> None:
    """
    Validate all required settings at startup.

    Raises:
        ValueError: If required settings are missing or invalid
    """
    logger.info(f"Validating settings for ENV={settings.ENV}")

    settings.validate_required_for_env()

    logger.info(
        "Settings validation passed",
        extra={'extra_fields': {
            'mc_max_rounds': settings.MC_MAX_ROUNDS,
            'mc_shard_rounds': settings.MC_SHARD_ROUNDS,
            'mc_workers': settings.MC_WORKERS,
            'quadrature_nodes': settings.QUADRATURE_NODES,
        }}
    )


def run_startup_validation() -> None:
    """
    Run all startup validations.

    Called from the API lifespan and the CLI; fails fast with a clear
    message if any validation fails.

    Raises:
        Exception: If any validation fails
    """
    try:
        validate_settings()
    except Exception as e:
        logger.error(f"Startup validation failed: {e}")
        raise
