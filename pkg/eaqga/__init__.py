"""
EAQGA - entanglement-aware quantum-enhanced genetic algorithm for QUBO problems.
"""

__version__ = "1.0.0"
