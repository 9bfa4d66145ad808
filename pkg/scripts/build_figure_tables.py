#!/usr/bin/env python3
"""
Data tables for the two standard plots: critical curves e_b(p) for b = 0..3
and the Malthusian parameter theta(alpha) at p = 0.4.
"""

import argparse
import logging
import os
import sys

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from analytics import CtpParams, critical_alpha, malthusian_theta
from config import DEFAULT_TOL, RESULTS_DIR, ensure_directories
from offspring import parse_offspring
from scripts.utils import write_csv

logger = logging.getLogger(__name__)

DELAYS = (0, 1, 2, 3)


def critical_curve_rows(dist, points, tol=DEFAULT_TOL):
    rows = []
    for b in DELAYS:
        for p in np.linspace(1.0 / points, 1.0, points):
            rows.append({"b": b, "p": float(p), "e_b": critical_alpha(dist, b, float(p), tol)})
        logger.info(f"critical curve b={b} done")
    return rows


def theta_curve_rows(dist, points, p=0.4, tol=DEFAULT_TOL):
    rows = []
    for b in DELAYS:
        cutoff = critical_alpha(dist, b, p, tol)
        for alpha in np.linspace(0.0, 1.0, points):
            alpha = float(alpha)
            theta = malthusian_theta(CtpParams(b, p, alpha, dist), tol) if alpha < cutoff else None
            rows.append({"b": b, "alpha": alpha, "theta": theta})
        logger.info(f"theta curve b={b} done (cutoff {cutoff:.6f})")
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description="Write the critical-curve and theta-curve tables")
    parser.add_argument("--offspring", default="poisson:2.5")
    parser.add_argument("--points", type=int, default=200)
    parser.add_argument("--out-dir", default=RESULTS_DIR)
    args = parser.parse_args(argv)

    ensure_directories()
    os.makedirs(args.out_dir, exist_ok=True)
    dist = parse_offspring(args.offspring)

    critical_path = os.path.join(args.out_dir, "critical_curves.csv")
    write_csv(critical_curve_rows(dist, args.points), critical_path, ["b", "p", "e_b"])
    print(f"✅ Wrote {critical_path}")

    theta_path = os.path.join(args.out_dir, "theta_curve.csv")
    write_csv(theta_curve_rows(dist, args.points), theta_path, ["b", "alpha", "theta"])
    print(f"✅ Wrote {theta_path}")
    return 0


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    sys.exit(main())
