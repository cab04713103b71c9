# Configuration settings for the chromosome straightening toolkit

# Canvas / preprocessing
CANVAS_SIZE = 256  # Chromosomes are centered on a square black background
INVERT_INPUT = True  # Karyotype scans are dark-on-light; the pipeline wants light-on-dark
NORM_MEAN = 0.5
NORM_STD = 0.5

# Backbone extraction
SMOOTH_WINDOW = 11  # Moving-average window length (rows)
AXIS_PARTS = 11  # Equal parts along y; first and last are dropped
NUM_CONTROL_POINTS = 10
NUM_STICKS = 9
STICK_WIDTH = 33  # Pixels, for 256x256 inputs
STICK_VALUE_STEP = 23  # 23, 46, ..., 207 in 8-bit
MIN_FOREGROUND_ROWS = 22

# Augmentation
AUGMENT_PAIRS = 1000
DEFORM_POINTS = 3  # Control grid size per axis
DEFORM_SIGMA = 18.0  # Displacement std in pixels, for 256x256 inputs
MAX_ROTATION = 45.0  # Degrees, sampled uniformly in [-MAX_ROTATION, MAX_ROTATION]
TRAIN_FRACTION = 0.9  # 9:1 train/validation split
MIN_AUGMENT_PAIRS = 10

# Translator architecture
UNET_DEPTH = 4
BASE_CHANNELS = 16
DISC_STRIDED_LAYERS = 3
DISC_FLAT_LAYERS = 2
DROPOUT_RATE = 0.5  # The generator's noise source
INIT_STD = 0.02

# Training protocol
LEARNING_RATE = 4e-5
L1_WEIGHT = 100.0  # lambda
BATCH_SIZE = 4
ADAM_BETAS = (0.5, 0.999)
CHECKS_PER_EPOCH = 3
DECAY_PATIENCE = 9  # Stale checks before the learning rate is reduced
DECAY_FACTOR = 0.8
STOP_PATIENCE = 27  # Stale checks before training stops
MAX_EPOCHS = 200
TRAIN_MODES = ("u_net_only", "pix2pix")

# Geometric baseline
BEND_WINDOW = 10  # Rows averaged on each side of a bend candidate
MIN_BEND_ANGLE = 5.0  # Degrees
THIN_THRESHOLD = 10 / 255

# Synthetic chromosomes
SYNTH_CENTROMERE_WIDTH = 25
SYNTH_END_WIDTH = 17
SYNTH_EDGE_RAMP = 2.0  # Pixels

# Evaluation
PROFILE_SAMPLES = 100
FOREGROUND_THRESHOLD = 10 / 255  # Cross-section samples at or below this are background

# Runtime
DEFAULT_SEED = 0
THREADS_ENV_VAR = "STRAIGHTKIT_THREADS"

# File names inside output directories
MANIFEST_NAME = "manifest.txt"
PAIRS_DIR = "pairs"
CHECKPOINT_NAME = "checkpoint.pt"
TRAIN_LOG_NAME = "train_log.txt"
