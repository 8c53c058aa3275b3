"""
Django settings for the Qaranking project.

The project hosts the Holorank app: the learning-to-rank library for
question-answer pairs, its management commands and its run registry.
Every numeric default below can be overridden from the environment or a
local .env file.
"""

from pathlib import Path
import os
import sys

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


def load_dotenv(path):
    if not path.exists():
        return
    for raw_line in path.read_text(encoding="utf-8").splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("export "):
            line = line[7:].strip()
        if "=" not in line:
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            continue
        if value and len(value) >= 2 and value[0] == value[-1] and value[0] in {"'", '"'}:
            value = value[1:-1]
        os.environ.setdefault(key, value)


load_dotenv(BASE_DIR / ".env")


def env_bool(name, default=False):
    raw_value = os.getenv(name)
    if raw_value is None:
        return default
    return str(raw_value).strip().lower() in {"1", "true", "yes", "on"}


DJANGO_ENV = os.getenv("DJANGO_ENV", "local").strip().lower()
IS_PRODUCTION = DJANGO_ENV == "production"
IS_TEST = "test" in sys.argv

DEBUG = env_bool("DJANGO_DEBUG", not IS_PRODUCTION)

INSTALLED_APPS = [
    'Holorank',
]

# Database
# The database only stores the run registry (TrainingRun / EpochRecord).

dj_database_url = None
try:
    import dj_database_url  # type: ignore
except ImportError:
    dj_database_url = None

DATABASE_URL = os.getenv("DATABASE_URL", "").strip()
if DATABASE_URL and len(DATABASE_URL) >= 2 and DATABASE_URL[0] == DATABASE_URL[-1] and DATABASE_URL[0] in {"'", '"'}:
    DATABASE_URL = DATABASE_URL[1:-1].strip()
if DATABASE_URL.lower() in {"none", "null"}:
    DATABASE_URL = ""
if DATABASE_URL:
    if dj_database_url is None:
        raise RuntimeError("DATABASE_URL is set but the 'dj-database-url' package is not installed.")
    try:
        DATABASES = {
            "default": dj_database_url.parse(
                DATABASE_URL,
                conn_max_age=int(os.getenv("DATABASE_CONN_MAX_AGE", "600")),
                ssl_require=env_bool("DATABASE_SSL_REQUIRE", IS_PRODUCTION),
            )
        }
    except ValueError as exc:
        raise RuntimeError(
            "DATABASE_URL is invalid. Use a proper connection string or remove the variable entirely."
        ) from exc
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": BASE_DIR / "db.sqlite3",
        }
    }

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Logging
HOLORANK_LOG_LEVEL = os.getenv("HOLORANK_LOG_LEVEL", "WARNING" if IS_TEST else "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "Holorank": {
            "handlers": ["console"],
            "level": HOLORANK_LOG_LEVEL,
            "propagate": True,
        },
    },
}

# Model knobs (defaults follow the TREC QA regime)
HOLORANK_ARCHITECTURE = os.getenv("HOLORANK_ARCHITECTURE", "hdlstm").strip().lower()
HOLORANK_EMBED_DIM = int(os.getenv("HOLORANK_EMBED_DIM", "50"))
HOLORANK_LSTM_DIM = int(os.getenv("HOLORANK_LSTM_DIM", "640"))
HOLORANK_LSTM_LAYERS = int(os.getenv("HOLORANK_LSTM_LAYERS", "2"))
HOLORANK_HIDDEN_DIM = int(os.getenv("HOLORANK_HIDDEN_DIM", "64"))
HOLORANK_NTN_SLICES = int(os.getenv("HOLORANK_NTN_SLICES", "5"))
HOLORANK_MAX_LEN_Q = int(os.getenv("HOLORANK_MAX_LEN_Q", "11"))
HOLORANK_MAX_LEN_A = int(os.getenv("HOLORANK_MAX_LEN_A", "38"))
HOLORANK_DROPOUT = float(os.getenv("HOLORANK_DROPOUT", "0.5"))
HOLORANK_ACTIVATION = os.getenv("HOLORANK_ACTIVATION", "tanh").strip().lower()
HOLORANK_PRECISION = os.getenv("HOLORANK_PRECISION", "f32").strip().lower()

# Training knobs
HOLORANK_LEARNING_RATE = float(os.getenv("HOLORANK_LEARNING_RATE", "1e-5"))
HOLORANK_L2_LAMBDA = float(os.getenv("HOLORANK_L2_LAMBDA", "1e-5"))
HOLORANK_CLIP_NORM = float(os.getenv("HOLORANK_CLIP_NORM", "1.0"))
HOLORANK_BATCH_SIZE = int(os.getenv("HOLORANK_BATCH_SIZE", "256"))
HOLORANK_MAX_EPOCHS = int(os.getenv("HOLORANK_MAX_EPOCHS", "30"))
HOLORANK_PATIENCE = int(os.getenv("HOLORANK_PATIENCE", "5"))
HOLORANK_KEEP_TOP_K = int(os.getenv("HOLORANK_KEEP_TOP_K", "3"))
HOLORANK_SEED = int(os.getenv("HOLORANK_SEED", "1"))
HOLORANK_WORKERS = int(os.getenv("HOLORANK_WORKERS", "1"))
HOLORANK_OUTPUT_DIR = os.getenv("HOLORANK_OUTPUT_DIR", "runs")

# Retrieval knobs
HOLORANK_BM25_K1 = float(os.getenv("HOLORANK_BM25_K1", "1.2"))
HOLORANK_BM25_B = float(os.getenv("HOLORANK_BM25_B", "0.75"))

# Benchmark knobs
HOLORANK_BENCH_REPETITIONS = int(os.getenv("HOLORANK_BENCH_REPETITIONS", "30"))
HOLORANK_BENCH_WARMUPS = int(os.getenv("HOLORANK_BENCH_WARMUPS", "5"))
HOLORANK_BENCH_TENSOR_MAX_ELEMENTS = int(os.getenv("HOLORANK_BENCH_TENSOR_MAX_ELEMENTS", str(2 ** 25)))
