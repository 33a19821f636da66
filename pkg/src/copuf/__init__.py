"""Simulation and modeling-attack workbench for challenge-obfuscated
arbiter PUFs."""

from .core import (
    GOLDEN,
    NOISE_SCALE,
    ApufInstance,
    NoiseModel,
    apuf_respond,
    arbitrate,
    calibrated_noise,
    derive_weights,
    evaluate_delay,
    parity_transform,
)
from .composites import (
    ARBITER_BIAS_SCALE,
    LOOP_CONFIGS,
    FfApufInstance,
    IpufInstance,
    LoopSpec,
    MnApufInstance,
    OaxFfInstance,
    XorFfInstance,
    ff_respond,
    instance_from_descriptor,
    ipuf_respond,
    mn_respond,
    oax_ff_respond,
    respond,
    xor_ff_respond,
)
from .features import feature_map_for, ff_features, plain_features
from .metrics import MetricsReport, measure, measure_ber, measure_uniformity
from .crpio import CrpSet, generate_crps, read_crps, split, write_crps
from .mlp import (
    DivergenceError,
    MlpConfig,
    MlpModel,
    choose_l,
    gradient_check,
    hidden_sizes,
    init_model,
    train_arrays,
)
from .attack import AttackReport, best_of, evaluate, run_attack, train

__version__ = "0.1.0"
