"""Single-photon interaction-free measurement simulator."""

from .amplitude import (
    AbsorptionRecord,
    ConditioningError,
    ModeSpace,
    PureState,
    UnknownModeError,
    explosion_measure,
    make_state,
    renormalize_live,
    total_probability,
)
from .composite import (
    CompositeCircuit,
    CompositeState,
    JointOutcome,
    apply_local,
    coincidence_absorb,
    nested_ifm,
    tensor,
)
from .optics import (
    Absorber,
    BeamSplitter,
    Circuit,
    CircuitError,
    DetectorSet,
    Mirror,
    OutcomeDistribution,
    PhaseShift,
    apply_element,
    build_mzi,
    measure,
    run_circuit,
)
from .protocols import (
    CavityConfig,
    EfficiencyReport,
    ZenoConfig,
    dicke_energy_shift,
    efficiency_frontier,
    ev_iterated,
    ev_single_shot,
    irradiation_metric,
    negative_result_update,
    paul_pavicic,
    zeno_ifm,
)
from .tsvf import (
    ABLUndefinedError,
    PostselectionError,
    TraceMap,
    TwoStateRecord,
    abl_probability,
    backward_propagate,
    trace_map,
    two_state,
)

__version__ = "0.1.0"
