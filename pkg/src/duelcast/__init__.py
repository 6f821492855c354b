"""Two-player interactive differential games: simulation and short-term prediction.

The simulator plays games whose controls are bent by hidden behavioral
feedbacks; the prediction pipeline estimates locally conserved probe
combinations from the recorded play, inverts them for the controls, and
integrates a delayed surrogate game forward to produce short-term forecasts,
with candidate-set selection and a two-delay horizon estimate on top.
"""

from .conservation import (
    ConservedFrame,
    FrameSeries,
    conserved_values,
    estimate_frames,
    probe_derivatives,
)
from .dynamics import (
    GameDefinition,
    History,
    ReactionSpec,
    apply_reactions,
    constant_schedule,
    eval_rhs,
    extend_history,
    scenario,
    simulate,
)
from .errors import DuelcastError
from .harness import ExperimentConfig, load_history, run_experiment, save_history
from .inversion import InversionSettings, control_jacobian, invert_controls
from .numerics import (
    TimeGrid,
    central_difference,
    newton_solve,
    orthonormal_complement,
    rk4_step,
)
from .predictor import (
    ControlPlan,
    HorizonSpec,
    Prediction,
    SurrogateSpec,
    estimate_horizon,
    predict,
)
from .probes import (
    ProbeExpression,
    ProbeLibrary,
    ProbeSet,
    canonical_probe_set,
    eval_probe_vector,
    generate_library,
    probe_jacobian_u,
    random_probe_set,
)
from .selection import (
    BacktestReport,
    CandidateLabel,
    CandidateSet,
    Pool,
    backtest_score,
    default_projective_base,
    evolve_pool,
    hyperplane_probe_set,
    projective_search,
    select_best,
)

__version__ = "0.1.0"
