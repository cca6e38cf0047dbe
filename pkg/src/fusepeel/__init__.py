"""Peeling of fuse graphs: generation, peeling, threshold certificates and retrieval."""

from .hypergraph import (
    CapacityError,
    Edge,
    FuseParams,
    Hypergraph,
    Orientation,
    SegmentLayout,
    generate_er,
    generate_fuse,
    is_valid_orientation,
    orient,
)
from .peeler import (
    PeelResult,
    is_peelable,
    orientation_from_peel,
    peel_rounds,
    peel_sequential,
    rooted_survival,
    segment_survival,
)
from .retrieval import (
    BuildFailed,
    CapacityExceeded,
    FormatError,
    RetrievalParams,
    RetrievalStructure,
    build,
    deserialize,
    query,
    query_many,
    serialize,
)
from .threshold import (
    CheckResult,
    ProbWindow,
    ThresholdBracket,
    Verdict,
    apply_p,
    apply_phat,
    bracket_threshold,
    consolidation_check,
    erosion_check,
    fixed_points,
    iterate_p,
)

__version__ = "0.1.0"
