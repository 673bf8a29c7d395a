"""Joint transceiver design for RIS-assisted dual-function radar-communication
with movable transmit and receive antennas."""

__version__ = "0.1.0"

from .config import BcdConfig, PenaltyConfig, ScenarioConfig, ScenarioGeometry  # noqa: E402
from .geometry import ChannelState, sample_channels  # noqa: E402

__all__ = [
    "__version__",
    "BcdConfig",
    "PenaltyConfig",
    "ScenarioConfig",
    "ScenarioGeometry",
    "ChannelState",
    "sample_channels",
]
