"""Privacy-aware federated conformance checking over open Petri nets."""
__version__ = "0.1.0"
