"""Polygonal spiral growth: a facet-length ODE model and a level-set model.

Modules
-------
wulff       support functions, dual energy densities and Wulff shapes
spiral_ode  event-driven facet ODE for a spiral pinned at the origin
levelset    finite-difference solver for the spiral level-set equation
height      branches of ``arg x`` cut along a spiral and their L1 distance
experiments scenario presets, paired runs and sweeps
cli         command-line entry point
"""

__version__ = "0.1.0"
