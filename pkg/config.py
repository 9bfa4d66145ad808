import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Numerical Configuration
DEFAULT_TOL = float(os.getenv("CTRACE_TOL", "1e-10"))
FIXED_POINT_TOL = float(os.getenv("CTRACE_FIXED_POINT_TOL", "1e-12"))
INITIAL_TRUNCATION = int(os.getenv("CTRACE_INITIAL_TRUNCATION", "64"))
MAX_TRUNCATION = int(os.getenv("CTRACE_MAX_TRUNCATION", str(2**20)))

# Simulation Configuration
POPULATION_CAP = int(os.getenv("CTRACE_POPULATION_CAP", "10000000"))
GROWTH_POPULATION_CAP = int(os.getenv("CTRACE_GROWTH_POPULATION_CAP", "200000"))
CLUSTER_AGE_CAP = int(os.getenv("CTRACE_CLUSTER_AGE_CAP", "100000"))
UNTREATED_CAP = int(os.getenv("CTRACE_UNTREATED_CAP", "100000"))
ORACLE_PATH_CAP = int(os.getenv("CTRACE_ORACLE_PATH_CAP", "100000000"))

# Monte Carlo Configuration
MASTER_SEED = int(os.getenv("CTRACE_SEED", "20240601"))
MC_WORKERS = int(os.getenv("CTRACE_WORKERS", "1"))
CHUNK_SIZE = int(os.getenv("CTRACE_CHUNK_SIZE", "100000"))

# System Configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", "logs/ctrace.log")

# File Paths
RESULTS_DIR = os.getenv("RESULTS_DIR", "results/")
LOGS_DIR = os.getenv("LOGS_DIR", "logs/")


def master_seed():
    """Master seed, with an exported CTRACE_SEED taking precedence over the .env default."""
    return int(os.getenv("CTRACE_SEED", str(MASTER_SEED)))


def ensure_directories():
    """Create output directories if they don't exist."""
    for directory in [RESULTS_DIR, LOGS_DIR, os.path.dirname(LOG_FILE)]:
        if directory:
            os.makedirs(directory, exist_ok=True)
