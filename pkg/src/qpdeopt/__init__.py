"""Block-encoded PDE-constrained optimization with quantum Hamiltonian descent,
simulated exactly on dense statevectors."""

__version__ = "0.1.0"
