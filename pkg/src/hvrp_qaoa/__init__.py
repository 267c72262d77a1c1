"""QAOA simulation for heterogeneous vehicle routing encoded as QUBO/Ising models."""

__version__ = "0.1.0"
