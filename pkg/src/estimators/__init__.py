"""
Estimators Module

Monte Carlo estimators of entrance and ruin probabilities with confidence
intervals, conditional Monte Carlo and big-jump diagnostics.
"""
