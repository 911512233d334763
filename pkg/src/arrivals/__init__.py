"""
Arrivals Module

Counting processes for claim arrival times, their mean measures and the moment
diagnostics that infinite-horizon results rely on.
"""
