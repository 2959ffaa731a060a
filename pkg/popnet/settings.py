# -*- coding: utf-8 -*-
# Sobel kernels (unnormalized, used as a cross-correlation with replicate padding)
SOBEL_KERNEL_X = ((-1.0, 0.0, 1.0),
                  (-2.0, 0.0, 2.0),
                  (-1.0, 0.0, 1.0))
SOBEL_KERNEL_Y = ((-1.0, -2.0, -1.0),
                  (0.0, 0.0, 0.0),
                  (1.0, 2.0, 1.0))

# Grid conventions
MIN_GRID_SIZE = 8
NEARNESS = "nearness"
METRIC_DEPTH = "metric-depth"
DEPTH_CONVENTIONS = (NEARNESS, METRIC_DEPTH)
FOUR_CONNECTED = "four-connected"

# Structure preserving loss
SSIM_WINDOW = 3
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

# Local smoothing and edge sharpening losses
COSINE_EPS = 1e-8
WTV_GAMMA = 0.5
WTV_POWER = 1
DEFAULT_LAMBDA1 = 1.0
DEFAULT_LAMBDA2 = 1.0

# Object separation
SEPARATION_SIGMA = 10.0
BCE_EPS = 1e-7
BINARIZATION_THRESHOLD = 0.5

# Total objective
DEFAULT_ALPHA1 = 1.0
DEFAULT_ALPHA2 = 1.0
LOSS_NAMES = ("dep", "loc", "wtv", "sep")

# Networks
DOWNSAMPLING_FACTOR = 32
TOY_CHANNELS = (16, 32, 64, 128, 256)
FULL_CHANNELS = (64, 64, 128, 256, 512)
ENCODER_FAMILIES = ("plain", "residual")

# Evaluation protocol
F_BETA_SQUARED = 0.3
S_ALPHA = 0.5
NB_THRESHOLDS = 256
METRIC_NAMES = ("M", "Fm", "Sm", "Em")
OBJECT_COUNT_GROUPS = ("single_object", "multi_object")

# Training protocol
DEFAULT_RESOLUTION = 352
DEFAULT_LEARNING_RATE = 1e-4
DEFAULT_LR_STEP_EPOCHS = 60
DEFAULT_LR_GAMMA = 0.1
DEFAULT_EPOCHS = 100
DEFAULT_BATCH_SIZE = 8
DEFAULT_WEIGHT_DECAY = 0.0
DEFAULT_SEED = 0

# Dataset layout (shared by synthetic export and real-data ingestion)
IMAGES_DIR = "images"
DEPTHS_DIR = "depths"
GT_DEPTHS_DIR = "gt_depths"
MASKS_DIR = "masks"
SURFACES_DIR = "surfaces"
MANIFEST_FILE_NAME = "manifest.json"
IMAGE_EXTENSION = ".png"
DEPTH_SCALE = 65535.0
RGB_SCALE = 255.0
MASK_THRESHOLD = 127
DATASET_FORMAT_VERSION = 1

# Checkpoints
CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_EXTENSION = ".pt"

# Inference outputs
INFERENCE_FILE_NAMES = {"d_po": "popped_depth.png",
                        "d_c": "contact_surface.png",
                        "s_tilde": "semantic_mask.png",
                        "s_s": "separation_mask.png",
                        "hard": "hard_mask.png"}

# Command line
EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_DATA_ERROR = 2
EXIT_NUMERIC_FAILURE = 3
SEED_ENVIRONMENT_VARIABLE = "POPNET_SEED"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Gradient verification
GRADCHECK_STEP = 1e-4
GRADCHECK_SIZE = 8
GRADCHECK_INSTANCES = 10
GRADCHECK_TOLERANCES = {"float32": 1e-3, "float64": 1e-6}
