"""Safety-shielded sampling MPC on a curvilinear racing simulator."""

__version__ = "0.1.0"
