"""Executable model of a hybrid MQTT / UMA IoT security protocol."""

from .core import (
    FlowTranscript,
    MessageKind,
    NodeRole,
    PhaseKind,
    ProtocolMessage,
    Token,
    TokenKind,
    TokenRegistry,
    TokenState,
    new_token,
    validate,
)
from .hybrid import HybridSystem, HybridTopology, role_map
from .queueing import QueueMetrics, QueueParameters, metrics, sweep
from .sim import SimConfig, SimResult, simulate, validate_against_analytic
from .timing import TimingConfig, cost_transcript, phase_latency, publish_overhead_ratio

__version__ = "0.1.0"
