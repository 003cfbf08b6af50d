"""Deliberation engine that elicits values cards from participants, links them
with peer-voted wisdom edges, and aggregates the result into a moral graph."""

__version__ = "0.1.0"

from .aggregation import (  # noqa: F401
    EdgeAcceptancePolicy,
    PageRankParams,
    aggregate,
    pagerank,
)
from .gateway import GatewayConfig, LLMGateway  # noqa: F401
from .model import (  # noqa: F401
    AttentionalPolicy,
    MoralContext,
    MoralGraph,
    Scenario,
    ValuesCard,
    WisdomEdge,
)
from .platform import Deployment  # noqa: F401
