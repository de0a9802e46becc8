"""
Sparse Market Lab - Backend Application Package

Simulation toolkit for stable matching in random markets with short
preference lists: deferred acceptance engines, Monte Carlo experiments,
closed-form predictions and school-choice counterfactuals.
"""

__version__ = "0.1.0"
