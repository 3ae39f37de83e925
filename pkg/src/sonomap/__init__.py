"""sonomap: gesture-to-sound mapping engine.

Sensor ingestion, motion/EMG feature extraction, mapping models
(regression, classification, temporal alignment), granular and
corpus-based synthesis back ends, and an agent-assisted mapping
explorer steered by human feedback.
"""

__version__ = "0.1.0"

from . import agent, corpus, errors, features, granular, ingest, models, session

__all__ = [
    "agent",
    "corpus",
    "errors",
    "features",
    "granular",
    "ingest",
    "models",
    "session",
    "__version__",
]
