"""Upper bounds for the maximum of a negative-drift random walk.

The package has four working parts:

* :mod:`driftbound.distributions` - increment laws and their moment machinery;
* :mod:`driftbound.bounds` - the closed-form tail inequalities and rates;
* :mod:`driftbound.montecarlo` - regenerative simulation and exact lattice
  oracles used to verify every bound;
* :mod:`driftbound.heavytraffic` - drift-to-zero experiments comparing the
  bounds against the regularly-varying asymptote.

``driftbound.cli`` wires these into the ``driftbound`` command.
"""

from .distributions import (
    DistributionSpec,
    ExponentialShift,
    MomentProfile,
    Normal,
    ParetoShift,
    TruncatedMoments,
    TwoPoint,
    integrated_tail,
    mgf,
    mgf_truncated,
    moment_profile,
    sample_increments,
    spec_from_dict,
    spec_from_json,
    spec_to_dict,
    spec_to_json,
    tail,
    truncated_moments,
    validate_spec,
)
from .errors import (
    DriftboundError,
    InfiniteVariance,
    InvalidOrder,
    InvalidParameter,
    MomentDoesNotExist,
    NonNegativeDrift,
    RateNotCertified,
    StepLimitExceeded,
    ValidityViolation,
)

# submodules importable as attributes; report stays lazy (pulls in matplotlib)
from . import bounds, heavytraffic, montecarlo  # noqa: E402  isort: skip

__version__ = "0.1.0"
