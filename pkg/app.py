from __future__ import annotations

import logging
import os
import sys

from conservkit.cli import main

logging.basicConfig(level=os.getenv("CONSERVKIT_LOG_LEVEL", "WARNING").upper())
logger = logging.getLogger(__name__)


if __name__ == "__main__":
    logger.info("conservkit %s", " ".join(sys.argv[1:]))
    main(prog_name="conservkit")
