"""neohrv: HRV and blood-pressure analysis for preterm outcome prediction."""

__version__ = "0.1.0"
