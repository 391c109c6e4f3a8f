"""Numerical toolkit for Levi-flat hypersurfaces in C^2.

Foliation geometry, the leafwise 1-form alpha and its holonomy, complex
tangencies of real surfaces, leafwise potentials h and the closed-current
linear program on foliated meshes.
"""

from .errors import *  # noqa: F401,F403
from .surface import Surface, catalog, gauge_transform  # noqa: F401
from .frame import frame_at, alpha_at, structure_residual, commutator_normal  # noqa: F401

__version__ = "0.1.0"
