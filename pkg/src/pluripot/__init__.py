"""Numerical pluripotential calculus on P^1 and P^2.

Currents of bidegree (1,1) and measures represented through quasi-potentials
on chart grids, with super-potential pairings, regularization, wedge
products, capacity and Green-current dynamics for endomorphisms and regular
polynomial automorphisms.
"""

from .geom import (Automorphism, ChartGrid, ProjectivePoint, fs_box_mass,
                   fs_density, fs_distance, sample_automorphism)

__version__ = "0.1.0"
