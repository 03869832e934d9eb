"""Counting S-arithmetic points of bounded height in small balls of SL_n(R)."""
from .archimedean import (
    ArchBallSpec,
    MetricSpec,
    ball_volume_arch,
    distance,
    exp_jacobian,
    principal_log,
    regularity_check,
)
from .enumeration import (
    EnumerationReport,
    Region,
    count_ball,
    enumerate_level,
    enumerate_up_to_height,
    min_height,
)
from .errors import DomainError, InvariantViolation, NotFound, OutOfDomain, ResourceGuardError
from .exact import GroupPoint, PrimeSet, QMatrix, height, is_member, padic_norm, padic_valuation
from .padic_volume import (
    HeightBallSpec,
    VolumeTable,
    global_height_ball_volume,
    growth_fit,
    local_ball_volume_closed_form,
    local_ball_volume_oracle,
)
from .predictions import (
    ConstantsInput,
    ConstantsReport,
    ScanRow,
    covolume_fit,
    discrepancy,
    error_shape_fit,
    kappa_S,
    predicted_count,
    theorem_constants,
)

__version__ = "0.1.0"
