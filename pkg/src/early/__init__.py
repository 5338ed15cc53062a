"""Active querying of episodic expert demonstrations for sparse-reward navigation RL."""

__version__ = "0.1.0"
