#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Literals used by the W4 root finder."""

DAMPING_C = 2.0
DEFAULT_TOL = 1e-6
DEFAULT_DTAU = 0.5
NR_DTAU = 1.0
SOLVE_MAX_ITER = 10000
BASIN_MAX_ITER = 1000
BASIN_GRID_SIZE = 200

TABLE_X0S = tuple(-3.0 + 0.5 * k for k in range(13))
TABLE_METHODS = ("nr", "dn", "w4")
SERIES_Y = -1.0
SERIES_XS = (0.001, 0.005, 0.01)
RECURRENCE_STEPS = 50
RECURRENCE_TOL = 1e-12

PIVOT_TOL = 1e-300
EIGEN_PINV_RTOL = 1e-14
FD_REL_STEP = 1e-6
USER_DOMAIN = (-5.0, 5.0)
ROOT_REFINE_TOL = 1e-14
ROOT_REFINE_MAX_ITER = 100

CLASSIFY_RADIUS = 1e-3
UNCONVERGED_LABEL = 0
UNREGISTERED_LABEL = -1
PGM_MAXVAL = 255
PGM_UNREGISTERED_LEVEL = 32

SERIES_C = 50.0
SPECTRUM_EIG_TOL = 1e-6
SPECTRUM_NILPOTENT_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-10

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_SINGULAR = 3

BASIN_PGM_FILE = "basin.pgm"
BASIN_CSV_FILE = "basin.csv"
BASIN_STATS_FILE = "stats.json"
REPORT_TEMPLATE = "report.md.j2"
