from math import pi

DEFAULT_SEED = 0
DEFAULT_POINTS = 20
DEFAULT_JET_ORDER = 5
DEFAULT_RELATIVE_TOLERANCE = 1e-6
DEFAULT_ABSOLUTE_TOLERANCE = 1e-12
DEFAULT_SCALE_FLOOR = 1e-8
DEFAULT_SYMMETRY_TOLERANCE = 1e-10
DEFAULT_NONSYMMETRY_TOLERANCE = 1e-8
DEFAULT_WEYL_TOLERANCE = 1e-8
DEFAULT_RICCI_SIGN_TOLERANCE = 1e-10
DEFAULT_PROBE_FRACTION = 0.8
JET_CHUNK_BUDGET = 2048
MINIMUM_CHUNK_SIZE = 4

JACOBI_THRESHOLD = 1e-12
JACOBI_MAX_SWEEPS = 50

SIMPLIFY_MAX_PASSES = 8

RANDOM_LCF_MAX_AMPLITUDE = 0.3
RANDOM_LCF_MODES = (1, 2)

DEFAULT_RESOLUTION = 32
MINIMUM_RESOLUTION = 8
DEFAULT_CONVERGENCE_TOLERANCE = 1e-6
WARPED_FACTOR_TOLERANCE = 1e-9

DEFAULT_GRID_DEPTH = 40
MINIMUM_GRID_DEPTH = 20
SIMPLEX_MIN_DIMENSION = 3
SIMPLEX_MAX_DIMENSION = 12
SIMPLEX_STEP_FLOOR = 1e-10

DEFAULT_YAMABE_GRID = 256
YAMABE_SWEEP_SAMPLES = 400
YAMABE_SWEEP_RANGE = (0.1, 10.0)
YAMABE_MAX_ITERATIONS = 200
YAMABE_RTOL = 1e-12
YAMABE_ATOL = 1e-14
YAMABE_SERIES_CUTOFF = 1e-15
YAMABE_MAX_MODES = 160

UMBILIC_TOLERANCE = 1e-8
CARTAN_TOLERANCE = 1e-8
IMMERSION_TOLERANCE = 1e-10
GAUSS_TOLERANCE = 1e-7
PINCHING_TOLERANCE = 1e-12

DEFAULT_CIRCLE_LENGTH = 2 * pi
STEREOGRAPHIC_HALF_WIDTH = 1.0
POINCARE_BALL_FILL = 0.9
EUCLIDEAN_HALF_WIDTH = 1.0

REPORT_SCHEMA_VERSION = 1
SPEC_FORMAT_VERSION = 1

MAXIMUM_GRID_NODES = 262_144
RIGIDITY_REGIME_DIMENSION = 6
SIGNATURE_TOLERANCE = 1e-8
CONSTANT_SCALAR_TOLERANCE = 1e-6
YAMABE_RESIDUAL_TOLERANCE = 1e-8
YAMABE_SCALAR_TOLERANCE = 1e-5
YAMABE_Q_SPREAD = 1e-3
