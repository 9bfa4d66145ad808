#!/usr/bin/env python3
"""
Workspace setup for ctrace: output directories and a default .env.
"""

import os
import sys
from pathlib import Path

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import LOGS_DIR, RESULTS_DIR

ENV_CONTENT = """# ctrace Configuration
# Edit these values according to your setup

# Numerical Configuration
CTRACE_TOL=1e-10
CTRACE_FIXED_POINT_TOL=1e-12
CTRACE_INITIAL_TRUNCATION=64
CTRACE_MAX_TRUNCATION=1048576

# Simulation Configuration
CTRACE_POPULATION_CAP=10000000
CTRACE_GROWTH_POPULATION_CAP=200000
CTRACE_CLUSTER_AGE_CAP=100000
CTRACE_UNTREATED_CAP=100000
CTRACE_ORACLE_PATH_CAP=100000000

# Monte Carlo Configuration
CTRACE_SEED=20240601
CTRACE_WORKERS=1
CTRACE_CHUNK_SIZE=100000

# System Configuration
LOG_LEVEL=INFO
LOG_FILE=logs/ctrace.log

# File Paths
RESULTS_DIR=results/
LOGS_DIR=logs/
"""


def create_directories(root="."):
    """Create output directories."""
    for directory in [RESULTS_DIR, LOGS_DIR]:
        Path(root, directory).mkdir(parents=True, exist_ok=True)
        print(f"✅ Created directory: {directory}")
    return True


def create_environment_file(root="."):
    """Write env.example, and .env unless one already exists."""
    Path(root, "env.example").write_text(ENV_CONTENT)
    print("✅ Created env.example with default configuration")
    env_path = Path(root, ".env")
    if env_path.exists():
        print("⚠️  .env already exists; left untouched")
    else:
        env_path.write_text(ENV_CONTENT)
        print("✅ Created .env file with default configuration")
    return True


def main(root="."):
    print("🚀 Setting up ctrace workspace")
    print("=" * 60)

    if not create_directories(root):
        print("❌ Failed to create directories")
        return 1
    if not create_environment_file(root):
        print("❌ Failed to create environment file")
        return 1

    print("\n" + "=" * 60)
    print("✅ Setup completed successfully!")
    print("\n📋 Next steps:")
    print("1. Edit .env to change tolerances, caps or the master seed")
    print("2. Run: python3 ctrace.py validate --profile quick")
    print("3. Run: python3 scripts/build_figure_tables.py")
    return 0


if __name__ == "__main__":
    sys.exit(main())
