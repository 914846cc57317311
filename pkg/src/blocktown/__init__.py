"""blocktown: a residential-migration social dilemma simulator.

Agents spread over equally sized city blocks earn a reward that peaks at half
occupancy; each step every agent may stay or move to any non-full block, and
an optional curated message board lets them talk. The package provides exact
scaled-integer welfare metrics (price of anarchy against a dynamic-programming
optimum, residential Gini, a 3x3 action archetype matrix), deterministic
scripted policies, an HTTP gateway with record/replay for model-backed
policies, full-audit run logging, and a three-stage qualitative coding
pipeline over the reasoning logs.
"""

__version__ = "0.1.0"

from .board import (  # noqa: F401
    DO_NOTHING,
    BoardAction,
    BoardMessageView,
    DoNothing,
    Like,
    Message,
    MessageBoard,
    Post,
    apply_board_action,
)
from .gateway import (  # noqa: F401
    AuthError,
    CompletionExchange,
    ExhaustedError,
    GatewayClient,
    MissingRecordingError,
    ModelEndpoint,
    RateLimiter,
    ReplayStore,
    exchange_key,
    replay_complete,
)
from .metrics import (  # noqa: F401
    ActionMatrix,
    ArchetypeLabel,
    ConvergenceTracker,
    aggregate_actions,
    block_contribution,
    classify_action,
    individual_utility,
    move_system_delta,
    optimal_system_utility,
    price_of_anarchy,
    residential_gini,
    system_utility,
    utility_as_float,
)
from .parsing import AgentResponse, ParseError, parse_response  # noqa: F401
from .policies import (  # noqa: F401
    SCRIPTED_POLICIES,
    LlmOutcome,
    llm_decide,
    rng_for_agent,
    scripted_decide,
)
from .prompts import (  # noqa: F401
    HistoryEntry,
    Observation,
    build_prompt,
    template_fingerprint,
)
from .simulation import (  # noqa: F401
    ConfigError,
    DecisionRecord,
    RunConfig,
    RunSummary,
    compute_deltas,
    run,
)
from .analysis import AnalysisError, ReplayedRun, analyze, replay_run, write_reports  # noqa: F401
from .coding import (  # noqa: F401
    CodingResult,
    LogBatch,
    SampleError,
    StageError,
    run_pipeline,
    sample_logs,
)
from .world import FullBlockError, GridWorld, initial_world  # noqa: F401
