"""Topology-guided sparse scene graphs and multi-agent trajectory generation."""
from lanegraph.kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
