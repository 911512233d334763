"""
Experiment Runner Module

Declarative experiment configs, assembly checks and report emission.
"""
