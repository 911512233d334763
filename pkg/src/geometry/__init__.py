"""
Geometry Module

Rare sets A, ruin sets L and the scalarizing functional X_A.
"""
