"""Plotting frontend for mimodist CSV artifacts.

Consumes only the psd.csv / evm.csv files written by the simulator CLI;
no simulator internals are imported.
"""
from .render import PlotError, PlotJob, render_evm, render_psd

__all__ = ["PlotError", "PlotJob", "render_evm", "render_psd"]
__version__ = "0.1.0"
