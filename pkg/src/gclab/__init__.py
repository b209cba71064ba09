"""Shallow convolutional networks on graphs: spectral tools, training and Barron-space analysis."""

__version__ = "0.1.0"

from .graph_core import Graph, knn_graph, shift_matrices
from .spectral import SpectralBasis, joint_eigs, gft, igft
from .conv import ConvKernel, FilterPoly, convolve, filter_from_signal, conv_norm
from .model import NetworkParams, NormConfig, forward, path_norm
from .train import TrainConfig, sgdm, grad_check

__all__ = [
    "Graph", "knn_graph", "shift_matrices",
    "SpectralBasis", "joint_eigs", "gft", "igft",
    "ConvKernel", "FilterPoly", "convolve", "filter_from_signal", "conv_norm",
    "NetworkParams", "NormConfig", "forward", "path_norm",
    "TrainConfig", "sgdm", "grad_check",
]
