"""Complete twins of discrete-time price histories.

Any observed path of returns can be matched, to any precision, by a market
whose return magnitudes are band-limited and therefore predictable from the
past. Such a market is a binomial tree with known step sizes, so every claim
is replicable in it.
"""

__version__ = "0.1.0"

from .banlim import (  # noqa: E402
    BandLimitedExtension,
    BandSpec,
    SampledSignal,
    evaluate,
    interpolate_bandlimited,
    lowpass_project,
    projection_error,
    sinc_kernel,
)
from .errors import (  # noqa: E402
    DegenerateSpread,
    InvalidMagnitude,
    NotWithinEpsilon,
    ReturnOutOfRange,
    RoundedToZero,
    SingularSystem,
)
from .harness import (  # noqa: E402
    GOLDEN_SPEC,
    IncompleteModelSpec,
    hypothesis_report,
    indistinguishability_experiment,
    predictability_demo,
    round_to_tick,
    simulate_incomplete,
)
from .market import (  # noqa: E402
    CompleteTwin,
    PriceSeries,
    ReturnSeries,
    WeightConfig,
    build_twin,
    decompose,
    discount,
    verify_twin,
    weighted_norm,
)
from .replicate import (  # noqa: E402
    Claim,
    PredictableMagnitudes,
    ReplicationPlan,
    check_crr_completeness,
    martingale_prob,
    price,
    replicate,
    verify_replication,
)
