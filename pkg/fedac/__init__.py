"""FedAC clustered federated learning simulator."""

__version__ = "1.0.0"
