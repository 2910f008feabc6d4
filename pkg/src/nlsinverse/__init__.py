"""Forward and inverse scattering for -u'' + Q(x, u) u = k^2 u with compactly supported Q."""

__version__ = "0.1.0"
