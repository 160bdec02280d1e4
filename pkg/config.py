"""
Configuration settings for neumann-rbf.

Defaults for every experiment live here. Paths, logging and the worker
count can be overridden through environment variables; numerical defaults
are overridden per run through a config file or command-line flags
(see models/run_config.py).
"""

import os

# Output location
DEFAULT_OUTPUT_DIR = os.environ.get('NEUMANN_RBF_OUT', os.path.join(os.path.expanduser('./'), 'results'))

# Logging
LOG_LEVEL = os.environ.get('NEUMANN_RBF_LOG_LEVEL', 'INFO')

# Worker pool size for sweeps and global assembly
DEFAULT_WORKERS = int(os.environ.get('NEUMANN_RBF_WORKERS', '1'))

# Discretization defaults
DEFAULT_KERNEL = 'mq'
DEFAULT_EPS_S = 0.5
DEFAULT_POLY = 2
DEFAULT_MI = 15
DEFAULT_DMIN = 0.7
MIN_SUPPORTED_EPS_S = 0.2

# Spacing of the reference stencil experiments and of the test domain
# (the latter gives N_I close to 3,000)
REFERENCE_SPACING = 0.1
TEST_DOMAIN_SPACING = 0.034

# Local solves
SINGULAR_RCOND = 1e-15
LEBESGUE_GRID = 101

# Optimal directions
OPTDIR_TOL = 1e-10
OPTDIR_MAX_ITER = 200
SINGULAR_ROTATION = 1e-3

# Node handling, in units of the spacing s
LATTICE_CLEARANCE = 0.7
SMOOTHING_RADIUS = 1.5
SMOOTHING_SWEEPS = 20
FIRST_LAYER_DEPTH = 0.9
# interior nodes this close to the boundary are replaced by their feet
ON_BOUNDARY_DEPTH = 0.1
DEDUP_RADIUS = 0.5
MERGE_RADIUS = 0.25
BOUNDARY_RADIUS_FACTOR = 1.1

# Stability test
HHD_ITERATIONS = 50
STABLE_GROWTH = 10.0
DIVERGENT_GROWTH = 1e3

# Sweeps
ALPHA_SAMPLES = 721
STABILITY_EPS_GRID = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
STABILITY_DMIN_GRID = (0.05, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99)
OPTDIR_EPS_GRID = (0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
STABILITY_ORDERS = {2: 15, 3: 20, 4: 30}

# Perturbation amplitude (units of s) of the perturbed optimal-direction runs
OPTDIR_PERTURBATION = 0.05

# Candidate-position grid of the v-field map and samples along its envelope
VMAP_GRID = 81
ENVELOPE_SAMPLES = 241

# Application settings
APP_NAME = "neumann-rbf"
APP_VERSION = "1.0.0"
