"""Polynomial Lyapunov analysis with sum-of-squares programming."""
