"""
Simulation Module

Discounted aggregate claims, perturbed surplus paths and the risk-model
parameters they run on.
"""
