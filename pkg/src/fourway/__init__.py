"""Four-way decomposition of a treatment's total effect on a target event
under a competing event, estimated from discrete-time data."""

__version__ = "0.1.0"

from .dataio import Cohort, EventCode, ValidationError, expand_person_periods, load_csv  # noqa: E402
from .decomp import COMPONENTS, DecompositionCurve, decompose  # noqa: E402
from .hazards import ModelSpec, fit_cause_specific  # noqa: E402
from .pipeline import estimate  # noqa: E402

__all__ = ["Cohort", "EventCode", "ValidationError", "expand_person_periods", "load_csv",
           "COMPONENTS", "DecompositionCurve", "decompose", "ModelSpec", "fit_cause_specific",
           "estimate", "__version__"]
