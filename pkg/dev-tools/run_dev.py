"""
Development runner for the JOFC toolkit.

Runs a small matched and anomaly problem end to end so solver changes can
be eyeballed without the full desk-scale experiments.
"""

import logging
import sys
from pathlib import Path

# Add the repository root to Python path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from config import config
from errors import JofcError
from experiments import run_table1

if __name__ == "__main__":
    """
    Run both synthetic settings at a reduced size.

    Sizes can be bumped with the first two arguments: n and m.
    """
    # Set up logging
    config.setup_logging()
    logger = logging.getLogger(__name__)

    # Validate configuration
    try:
        config.validate()
        logger.info("✅ Configuration validated successfully")
    except ValueError as e:
        logger.error(f"❌ Configuration error: {e}")
        logger.error("Please check your .env file or JOFC_* environment variables.")
        sys.exit(1)

    n = int(sys.argv[1]) if len(sys.argv) > 1 else 100
    m = int(sys.argv[2]) if len(sys.argv) > 2 else 3

    logger.info(f"🚀 Running synthetic problems with n={n}, m={m}")
    logger.info(f"📐 Dense oracle cap: mn <= {config.MAX_DENSE_SIZE}")
    logger.info(f"📊 Log level: {config.LOG_LEVEL}")

    try:
        for setting in ("matched", "anomaly"):
            report, result = run_table1(setting, n=n, m=m, seed=config.DEFAULT_SEED, n_anomalies=min(10, n - 1))
            logger.info(
                f"{setting}: {result.iterations} iterations ({result.terminated}), "
                f"{report.mean_step_time * 1e3:.3f} ms per step"
            )
    except KeyboardInterrupt:
        logger.info("👋 Stopped by user")
    except JofcError as e:
        logger.error(f"💥 Run failed: {e}")
        sys.exit(e.exit_code)
