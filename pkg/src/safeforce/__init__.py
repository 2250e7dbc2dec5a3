"""Force-regulating contact controller for aerial manipulators.

A quadratic program picks joint and vehicle rates that drive the normal
contact force to a target while a barrier keeps the tool from touching the
surface before it is aligned with it.
"""

from .controller import ControllerConfig, control, default_config, evaluate
from .environment import SaturatingSpring, Spring, ForceTable, insertion_for_force, reaction_force
from .errors import ConfigError, ContractError
from .kinematics import RobotModel, forward_kinematics, grad_task, joint_axis, planar_arm
from .limits import LimitConfig, b_star, feasibility_margin, limit_preset, velocity_bounds
from .qp import QPProblem, QPSolution, assemble, solve
from .shaping import ScalarShaping, check_shaping, preset

__version__ = "0.1.0"
