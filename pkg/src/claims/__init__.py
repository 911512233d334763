"""
Claims Module

Heavy-tailed claim-vector laws in polar form (radial law x discrete spectral
measure) with temporal dependence across claim indices.
"""
