"""Global constants."""

import pathlib


def _find_project_root() -> pathlib.Path:
    """Find the project root (directory containing .dyadic-cubes/ or .git).

    Search order:
      1. Walk up from cwd
      2. Walk up from the package source directory (editable install)
    Fallback: cwd
    """
    markers = (".dyadic-cubes", ".git")

    def _search(start: pathlib.Path) -> pathlib.Path | None:
        for d in [start, *start.parents]:
            if any((d / m).exists() for m in markers):
                return d
        return None

    found = _search(pathlib.Path.cwd())
    if found:
        return found

    pkg_dir = pathlib.Path(__file__).resolve().parent  # src/dyadic_cubes/
    found = _search(pkg_dir)
    if found:
        return found

    return pathlib.Path.cwd()


PROJECT_ROOT = _find_project_root()

RUN_DIR = str(PROJECT_ROOT / "artifacts" / "runs")
SCHEMA_VERSION = 1

# Space limits
MAX_POINTS = 50_000
TRIANGLE_EXHAUSTIVE_LIMIT = 2_000
TRIANGLE_SAMPLE_TRIPLES = 200_000
DENSE_SAMPLE_LIMIT = 2_048
SYMMETRY_TOL = 1e-12
METRIC_TOL = 1e-12
GAMMA_SAFETY = 1.01

# Net / cube defaults
DEFAULT_R = 0.25
DEFAULT_C_STAR = 0.5
DEFAULT_BIG_C_STAR = 1.0
DEFAULT_CLOSURE_FACTOR = 1.0
DEFAULT_CHAIN_FACTOR = 1.0
D5_PAIR_BUDGET = 10_000
PAIR_EXHAUSTIVE_LIMIT = 2_000

# Framework / energy defaults
DEFAULT_P_MIN = 1.05
DEFAULT_P_MAX = 6.0
DEFAULT_BISECT_STEPS = 6
DEFAULT_W_BUDGET = 32
DEFAULT_PAIR_BUDGET = 1_000
ENERGY_TOL = 1e-10
ENERGY_MAX_INNER = 10_000
WEIGHT_FLOOR = 1e-12
IRLS_DAMPING = 0.5
SLOPE_BAND = 0.05

WORKERS_ENV = "DYADIC_CUBES_WORKERS"
