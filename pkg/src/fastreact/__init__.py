"""Fast-reaction-limit simulations for du = lap u - k u^m v, dv = -k u v."""

from .kernels import BACKEND
from .mesh import BC, Mesh, ScalarField, SubdomainMask, build_mesh, interior_mask, laplacian, sup_norm

__version__ = "0.1.0"
