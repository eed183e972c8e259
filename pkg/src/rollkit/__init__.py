"""Rolling of Riemannian manifolds: state space, dynamics, curvature and controllability."""
from .controllability import (holonomy_algebra, level2_convergence, lie_rank, ns_controllable,
                              rolcon_curvature, rolcon_reducibility, rolcon_transport,
                              small_loop_holonomy)
from .curvature import nabla_rol, rol, rol_tilde_spectrum
from .dynamics import (ControlPath, RollingTrajectory, SEElement, anti_develop, cartan_map,
                       geodesic_curve, integrate_rolling, roll_geodesic, roll_onto_flat)
from . import errors
from .errors import *  # noqa: F401,F403
from .extrinsic import correspondence, integrate_rolling_map, inverse_correspondence
from .geometry3d import contact_invariants, detect_structure, predict_orbit_dim
from .manifold_core import (ChartModel, Curve, LieGroupModel, ManifoldModel, TangentVector,
                            connection_table, geodesic, parallel_transport)
from .state_space import StatePoint, validate_state
from .zoo import make_manifold

__version__ = "0.1.0"

__all__ = [
    "ChartModel", "ControlPath", "Curve", "LieGroupModel", "ManifoldModel", "RollingTrajectory",
    "SEElement", "StatePoint", "TangentVector", "anti_develop", "cartan_map", "connection_table",
    "contact_invariants", "correspondence", "detect_structure", "geodesic", "geodesic_curve",
    "holonomy_algebra", "integrate_rolling", "integrate_rolling_map", "inverse_correspondence",
    "level2_convergence", "lie_rank", "make_manifold", "nabla_rol", "ns_controllable",
    "parallel_transport", "predict_orbit_dim", "rol", "rol_tilde_spectrum", "rolcon_curvature",
    "rolcon_reducibility", "rolcon_transport", "roll_geodesic", "roll_onto_flat",
    "small_loop_holonomy", "validate_state",
]
__all__ += [n for n in dir(errors) if isinstance(getattr(errors, n), type)
            and issubclass(getattr(errors, n), Exception) and getattr(errors, n).__module__ == errors.__name__]
