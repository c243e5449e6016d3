"""Full-state stabilization and cooperative control of nonholonomic
mechanical systems via passivity-based energy shaping.

The package splits into a mechanics core (``phcore``), concrete agent models
(``models``), the energy-shaping feedback (``idapbc``), the decomposed
switching potentials (``pcdpot``), the consensus layer (``coop``), the
deterministic simulator (``sim``) and the scenario/CLI front end
(``scenario``, ``cli``).
"""

from .coop import CoopGraph, CoopVariable, consensus_metrics, coop_variable, coupling_force
from .errors import (CollisionError, ControlError, ModelError,
                     NumericalFailure, ScenarioError)
from .idapbc import ControllerConfig, closed_loop_rhs, control_law, matching_residuals
from .models import (PcdReport, PcdStructure, build_arm3dof, build_diff_drive,
                     build_knife_edge, trivial_pcd, validate_pcd)
from .pcdpot import (Branch, GoalSpec, PotentialMode, apf_repulsive,
                     assemble_grad_Vd, grad_V_dr, grad_V_ds, switch_supervisor,
                     v_alpha, v_omega)
from .phcore import (FullState, MechanicalModel, ReducedState,
                     constraint_violation, full_constrained_rhs,
                     gyroscopic_matrix, reconstruct_full_momenta,
                     reduced_momenta, reduced_rhs)
from .scenario import DEFAULTS, ScenarioSpec, build_world, load_scenario
from .sim import RunReport, TrajectoryLog, monitors, run, step

__version__ = "0.1.0"
