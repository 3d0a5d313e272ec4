"""Aspect-aware sequential reranking to close the purchase-impression gap."""

from .core import (
    AspectValueKey,
    Candidate,
    ConfigurationError,
    GapRerankerError,
    Profile,
    QueryAspectModel,
    Session,
    ValidationError,
    normalize_query,
    validate_model,
    validate_profile,
    validate_session,
)
from .metrics import (
    EvalReport,
    GapBreakdown,
    average_gap,
    compare_rankers,
    highest_gap_aspect,
    impressed_share,
    mrr,
    paired_permutation_test,
    pooled_gap_curve,
    position_gap_curve,
    prefix_gap,
)
from .mining import (
    ModelStore,
    ParseError,
    PurchaseEvent,
    RangeError,
    UnsupportedVersionError,
    aggregate_shares,
    load_store,
    parse_log_record,
    save_store,
)
from .reranker import (
    ImpressionState,
    ais_features,
    bridge_score,
    delta_feature,
    final_score,
    rerank,
    select_next,
)

__version__ = "0.1.0"
