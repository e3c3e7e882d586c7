"""Inverse-aware surrogate modeling of parametric physical systems.

Train a deterministic emulator, an output-density flow and a variational
encoder/decoder pair on simulated data, then interrogate the decoder to
recover the set of inputs consistent with a target output.
"""

from .backend import backend_name
from .config import ExperimentConfig, defaults, load_config, save_config
from .emulator import (AuxLayout, EmulatorDataset, EmulatorModel, EmulatorSpec,
                       emulate, eval_emulator, rollout, train_emulator)
from .errors import ConfigError, DataError, InvnetError, NumericError
from .flows import FlowSpec, FlowStack, log_density, sample as sample_flow, train_flow
from .metrics import (InterrogationReport, fit_line_direction, verify_inversion,
                      zeta, zeta_rows)
from .optim import TrainConfig
from .rng import Rng
from .sampling import (LatentSampleSet, hd_sampling, invert, nf_latent_sampling,
                       pc_sampling, sample_prior)
from .scaling import NormalizationStats
from .serialize import ModelBundle, load_model, save_model
from .systems import (Dataset, generate_dataset, load_dataset, save_dataset,
                      split_indices)
from .vae import (CollapseDiagnosis, Decoder, PenaltyConfig, VaeDataset, VaeSpec,
                  VariationalEncoder, collapse_monitor, decode, encode, kl_loss,
                  train_vae_decoder)

__version__ = "0.1.0"

__all__ = [
    "AuxLayout", "CollapseDiagnosis", "ConfigError", "DataError", "Dataset",
    "Decoder", "EmulatorDataset", "EmulatorModel", "EmulatorSpec",
    "ExperimentConfig", "FlowSpec", "FlowStack", "InterrogationReport",
    "InvnetError", "LatentSampleSet", "ModelBundle", "NormalizationStats",
    "NumericError", "PenaltyConfig", "Rng", "TrainConfig", "VaeDataset",
    "VaeSpec", "VariationalEncoder", "backend_name", "collapse_monitor",
    "decode", "defaults", "emulate", "encode", "eval_emulator",
    "fit_line_direction", "generate_dataset", "hd_sampling", "invert",
    "kl_loss", "load_config", "load_dataset", "load_model", "log_density",
    "nf_latent_sampling", "pc_sampling", "rollout", "sample_flow",
    "sample_prior", "save_config", "save_dataset", "save_model",
    "split_indices", "train_emulator", "train_flow", "train_vae_decoder",
    "verify_inversion", "zeta", "zeta_rows",
]
