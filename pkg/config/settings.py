"""
Settings for the flow odometry tools.

Only ambient behaviour (logging and parallelism) is read from the environment
or an optional ``.env`` file. Everything that changes results is a command-line
flag or a config dataclass default.
"""

import os
from pathlib import Path

import environ

# Initialize environment variables
env = environ.Env(
    # Set default values
    FLOWODOM_LOG_LEVEL=(str, "INFO"),
    FLOWODOM_LOG_FORMAT=(str, "plain"),
    FLOWODOM_WORKERS=(int, 1),
)

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Take environment variables from .env file if it exists
ENV_FILE = os.path.join(BASE_DIR, ".env")
if os.path.exists(ENV_FILE):
    environ.Env.read_env(ENV_FILE)

LOG_LEVEL = env("FLOWODOM_LOG_LEVEL").upper()
LOG_FORMAT = env("FLOWODOM_LOG_FORMAT")
WORKERS = max(1, env.int("FLOWODOM_WORKERS"))

# Django is only used for its serializer layer; nothing is signed or stored.
SECRET_KEY = env("FLOWODOM_SECRET_KEY", default="flowodom-insecure-unused")

INSTALLED_APPS = [
    "rest_framework",
]

TIME_ZONE = "UTC"

USE_I18N = True

USE_TZ = True


# Defaults of the command-line tools

DEFAULT_HEIGHT = 64
DEFAULT_WIDTH = 64
DEFAULT_COUNT = 1
DEFAULT_SEED = 0
DEFAULT_PATCH_SIZE = 8
DEFAULT_WINDOW = 5
DEFAULT_WEIGHT_SIGN = "negated"
AGGREGATIONS = ("selection", "mean")
DEFAULT_AGGREGATION = "selection"
DEFAULT_L1_REDUCE = "mean"
DEFAULT_EPE_NORM = "l1"
SCENE_DIR_TEMPLATE = "scene_{index:05d}"


# Logging

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(levelname)s %(message)s"},
        "verbose": {
            "format": "%(asctime)s %(levelname)s %(name)s %(process)d %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": LOG_FORMAT if LOG_FORMAT in ("plain", "verbose") else "plain",
        },
    },
    "loggers": {
        "synthesis": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
        "odometry": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
        "config": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
    },
}
