"""Divergence-free stress surrogates on periodic cells.

Spectral solid-mechanics data generation, Fourier-space differential
operators on real half spectra, and Fourier neural operators whose output
layer can encode mechanical equilibrium exactly through a stress potential.
"""

from .backends import backend_name
from .container import FormatError, read_channels, read_tensor, write_channels, write_tensor
from .fields import MeanFluctSplit, TensorField, VectorField, split_mean_fluct
from .fno import FnoConfig, FnoModel, fno_backward, fno_forward, init_model, parameter_count
from .grid import GridSpec
from .materials import MaterialField, lame_from_engineering, voronoi_microstructure
from .mechanics import LoadCase, Sample, green_strain, solve_equilibrium, svk_stress
from .spectral import (
    HalfSpectrum,
    curl_potential,
    inc_potential,
    rdft2_forward,
    rdft2_inverse,
    spectral_div,
)
from .training import TrainConfig, evaluate, loss_data, loss_div, train, weight_matrix

__version__ = "0.1.0"

__all__ = [
    "FormatError",
    "FnoConfig",
    "FnoModel",
    "GridSpec",
    "HalfSpectrum",
    "LoadCase",
    "MaterialField",
    "MeanFluctSplit",
    "Sample",
    "TensorField",
    "TrainConfig",
    "VectorField",
    "backend_name",
    "curl_potential",
    "evaluate",
    "fno_backward",
    "fno_forward",
    "green_strain",
    "inc_potential",
    "init_model",
    "lame_from_engineering",
    "loss_data",
    "loss_div",
    "parameter_count",
    "rdft2_forward",
    "rdft2_inverse",
    "read_channels",
    "read_tensor",
    "solve_equilibrium",
    "spectral_div",
    "split_mean_fluct",
    "svk_stress",
    "train",
    "voronoi_microstructure",
    "weight_matrix",
    "write_channels",
    "write_tensor",
]
