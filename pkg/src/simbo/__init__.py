"""Self-identifying internal-model-based online optimization."""
from .problems import (Constant, InternalModel, QuadraticProblem, Ramp, Sine, SineRamp,
                       SineSquared, Switch, TvHessianProblem, make_quadratic, make_tv_hessian,
                       true_denominator)
from .ogd import contraction_factor, default_step, ogd_step, run_ogd
from .rls import RlsState, rls_init, rls_observe, rls_update, pe_order
from .imc import Controller, SynthesisConfig, SynthesisInfeasible, cb_step, synthesize, warm_start
from .supervisor import (SupervisorConfig, SupervisorState, run_identification, run_simbo,
                         simbo_init, simbo_step)

__version__ = "0.1.0"
