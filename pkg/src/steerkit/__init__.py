"""steerkit: desk-scale simulator and analysis toolkit for split-single-photon
homodyne steering tests."""

__version__ = "0.1.0"

from .fock import (  # noqa: F401
    DEFAULT_DIM,
    DEFAULT_SOURCE,
    IDEAL_SOURCE,
    DensityMatrix,
    SourceParams,
    TwoModeState,
    beamsplit,
    fidelity,
    partial_trace,
    restrict_qubit,
    source_state,
)
from .channels import (  # noqa: F401
    DEFAULT_NOISE,
    NoiseParams,
    apply_loss_mode_a,
    apply_loss_single,
    loss_kraus,
    phase_jitter_average,
)
from .homodyne import (  # noqa: F401
    QuadratureRecord,
    alice_measure_and_collapse,
    conditioned_on_sign,
    conditioned_state_full,
    conditioned_state_ideal,
    quad_wavefunction,
    quadrature_pdf,
    sample_quadrature,
)
from .steering import (  # noqa: F401
    ANNOUNCED_SIGN_OF_X,
    SteeringReport,
    SteeringSettings,
    f_factor,
    sigma_theta_expectation,
    steering_lhs_analytic,
    steering_lhs_states,
    steering_rhs_analytic,
    steering_rhs_state,
    sweep_reflectivity,
    violation,
)
from .tomography import (  # noqa: F401
    BootstrapResult,
    HomodyneDataset,
    MLEResult,
    TomographySetup,
    WignerGrid,
    bootstrap_violation,
    mle_reconstruct,
    povm_element,
    wigner,
    wigner_values,
)
from .experiment import (  # noqa: F401
    ExperimentConfig,
    RecordSet,
    RunArtifacts,
    analyze_records,
    replicate,
    run,
    run_adversary,
    run_honest,
)
from .runio import load, persist  # noqa: F401
