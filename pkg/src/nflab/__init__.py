"""Normal-form laboratory for time-dependent Schroedinger operators on spectral truncations."""

__version__ = "0.1.0"
