"""Volume-ordering simulator for Lifshitz-Slyozov-Wagner mean-field coarsening."""
from .ordering import (
    MonotoneFn,
    StepOrdering,
    evaluate,
    generalized_inverse,
    lp_distance,
    make_ordering,
    quantize,
    sample_ordering,
    sup_distance,
)
from .measures import (
    DiscreteMeasure,
    critical_radius,
    make_measure,
    measure_to_ordering,
    ordering_to_measure,
    theta_from_radius,
    wasserstein,
)
from .dynamics import (
    IntegrationError,
    InvalidStateError,
    QConserving,
    SimConfig,
    Trajectory,
    VolumeConserving,
    integrate,
    rhs,
    theta,
    vanishing_bracket,
)
from .diagnostics import (
    bump,
    check_invariants,
    convergence_study,
    lipschitz_study,
    weak_residual,
)

__version__ = "0.1.0"
