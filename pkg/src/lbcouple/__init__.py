"""lbcouple: D3Q19 lattice Boltzmann solver with resolved rigid-sphere coupling.

Two coupling families are implemented on top of a common lattice core:

* momentum exchange (``mem``): explicit solid mapping with link-wise no-slip
  closures of bounce-back, central-linear-interpolation and multireflection
  type, link-based force evaluation and PDF refilling;
* partially saturated cells (``psm``): per-cell solid volume fractions
  blending a fluid and a solid collision operator.

``bench`` drives the two validation studies (drag on a periodic sphere
array in Stokes flow, and a settling sphere across the Galileo-number
regimes) and the accompanying diagnostics.
"""

from .lattice import (C_Q, CS2, OPP, Q, W_Q, CollisionConfig, D3Q19,
                      FluidField, LatticeDescriptor, collide_bgk, collide_trt,
                      equilibrium, forcing, macroscopic_velocity, moments,
                      relaxation_parameters, stream)
from .geometry import (CellClassification, GeometryError, Sphere,
                       classify_cells, ray_sphere_delta, solid_fraction,
                       surface_normal_and_qn)
from .rigidbody import BodyState, integrate, surface_velocity
from .boundaries import (BoundaryLinks, FaceClosure, bounce_back_value,
                         build_links, cli_coefficients, cli_value,
                         mr_coefficients, mr_value)
from .mem import InstabilityError, MemSimulation, aggregate, link_force, reconstruct
from .psm import (PsmSimulation, PsmVariant, psm_collide_cell,
                  psm_force_torque, psm_velocity, solid_collision, weight_b)

__version__ = "0.1.0"
