import logging
import os
import sys

from straightkit.utils import config

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def setup_logging(verbose=False):
    """Send toolkit logs to stderr; artifacts go to the --out directory"""
    root = logging.getLogger("straightkit")
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt="%H:%M:%S"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False
    return root


def thread_cap():
    """Parallelism cap from STRAIGHTKIT_THREADS (default 1)"""
    raw = os.environ.get(config.THREADS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logging.getLogger(__name__).warning(
            "⚠️ Ignoring %s=%r (not an integer)", config.THREADS_ENV_VAR, raw
        )
        return 1
