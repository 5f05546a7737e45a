"""Numerical laboratory for fast-slow systems with Bogdanov-Takens fold points.

Modules
-------
ode_core
    Integrators with dense output, events and variational equations.
models
    Vector fields of the example system and the canonical fold model.
manifold
    Critical manifolds, folds, slow flow and jump orbits.
painleve
    First Painleve equation, tritronquee asymptotics and poles.
blowup
    Blow-up charts of the fold and their transition maps.
poincare
    Sections, return maps, periodic orbits, Lyapunov exponents, horseshoes.
experiments, cli
    Experiment drivers and the command line interface.
"""
__version__ = "0.1.0"
