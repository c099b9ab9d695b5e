# Scenario defaults (lab setup: 6 users, 4 of the 16 receive antennas)
DEFAULT_NUM_USERS = 6
DEFAULT_NUM_ANTENNAS = 4
DEFAULT_TRAIN_SYMBOLS = 685
DEFAULT_DATA_SYMBOLS = 3840
DEFAULT_POWER_STEP_DB = 3.0
DEFAULT_SNR_DB = float("inf")
DEFAULT_SEED = 20221111

# Cubic receiver distortion used by the nonlinear experiments
NONLINEAR_RX_GAIN = 0.05

# Signal of interest (1-based), the weak fourth user
DEFAULT_SOI = 4

# Network and training defaults
DEFAULT_HIDDEN_DIMS = [64, 64, 64]
DEFAULT_EPOCHS = 50
DEFAULT_BATCH_SIZE = 128
DEFAULT_LEARNING_RATE = 0.005
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

# Sweep defaults
DEFAULT_SNR_LIST = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]
DEFAULT_TRIALS = 20

# Modulation
QPSK_BITS_PER_SYMBOL = 2

# Detector and ablation identifiers
DETECTOR_LLS = "LLS"
DETECTOR_HYBRID = "HybridNN"
DETECTOR_PLAIN = "PlainNN"
DETECTORS = [DETECTOR_LLS, DETECTOR_HYBRID, DETECTOR_PLAIN]

ABLATION_SYMMETRY_ON = "symmetry_on"
ABLATION_SYMMETRY_OFF = "symmetry_off"
ABLATION_SYMMETRY_HALF = "symmetry_on_half_data"
ABLATIONS = [ABLATION_SYMMETRY_ON, ABLATION_SYMMETRY_OFF, ABLATION_SYMMETRY_HALF]

# Fused inference
FUSED_MAX_WIDTH = 128
VECTOR_LANE_WIDTH = 8
DEFAULT_TILE_ROWS = 256

# Random substream ids (see utils.rng)
STREAM_SYMBOLS = 0
STREAM_CHANNEL = 1
STREAM_NOISE = 2
STREAM_INIT = 3
STREAM_SHUFFLE = 4

# CLI exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING_FILE = 4
EXIT_DIMENSION_CONFLICT = 5
EXIT_DATASET_FORMAT = 6
EXIT_NUMERICAL = 7

# Environment overrides
ENV_OUTPUT_DIR = "NOMA_OUTPUT_DIR"
ENV_THREADS = "NOMA_THREADS"
DEFAULT_OUTPUT_DIR = "output"
