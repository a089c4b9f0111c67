"""Exception hierarchy shared by the simulator modules."""

from typing import Optional


class FedACError(Exception):
    """Base class for all simulator errors."""


class ShapeError(FedACError, ValueError):
    """Raised when vector or matrix dimensions do not line up."""


class NumericError(FedACError, ArithmeticError):
    """Raised when a forward/backward pass produces non-finite values."""

    def __init__(self, message: str, layer: Optional[int] = None):
        self.layer = layer
        if layer is not None:
            message = f"{message} (layer {layer})"
        super().__init__(message)


class ConfigurationError(FedACError, ValueError):
    """Raised for invalid run, partition or experiment configuration."""


class InsufficientDataError(FedACError):
    """Raised when an operation needs more models or samples than it got."""


class ClusterStateError(FedACError):
    """Raised when the cluster state cannot support the requested operation."""


class SnapshotError(FedACError):
    """Raised when a snapshot directory is missing or malformed."""
