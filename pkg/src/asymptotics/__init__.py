"""
Asymptotics Module

First-order asymptotic values of entrance and ruin probabilities, the targets
Monte Carlo estimates are compared against.
"""
