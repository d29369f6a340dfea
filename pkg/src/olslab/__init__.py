"""Online label smoothing on a from-scratch MLP, with calibration metrics."""

__version__ = "0.1.0"
