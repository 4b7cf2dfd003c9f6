# Numerics
DTYPE = "float64"
DEFAULT_EPS = 1e-5
DEFAULT_RHO = 0.1

# Norm family
DEFAULT_GROUPS = 32
NORM_KINDS = ("bn", "ebn", "ln", "in", "gn")
RUNNING_STAT_KINDS = ("bn", "ebn")
STD_CENTER_MODES = ("per-channel", "global")

# Harness architecture
INPUT_FEATURES = 28 * 28
NUM_CLASSES = 10
HIDDEN_LAYERS = 4
HIDDEN_UNITS = 128

# Training protocol
BASE_LR = 0.1
REFERENCE_BATCH = 128
BATCH_SIZE = 128
EPOCHS = 50
SGD_MOMENTUM = 0.5
WEIGHT_DECAY = 0.0
SEED = 0
TEST_BATCH_SIZE = 256
FINAL_EPOCH_WINDOW = 5
STABILITY_WINDOW = 20

# MNIST files
TRAIN_SIZE = 60000
TEST_SIZE = 10000
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

# Gradient checking
FD_STEP = 1e-5
GRAD_RTOL = 1e-4
GRAD_ATOL = 1e-7
KINK_MARGIN = 1e-4

# Output
CSV_COLUMNS = ("epoch", "train_loss", "train_acc", "test_acc", "wall_seconds")
CSV_FLOAT_FORMAT = "%.6g"
DATA_DIR_ENV = "NORMBENCH_DATA_DIR"
OUT_DIR_ENV = "NORMBENCH_OUT_DIR"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INGESTION = 3
EXIT_NUMERICAL = 4
