"""Discrete-event simulator of a multicast video-on-demand server.

Four admission-control policies share one workload, disk, and cache model:
worst-case deterministic, measured statistical, popularity-aware interval
caching, and prefix caching with batching onto multicast channels.
"""
from ._core import SimCore, get_core_class
from .admission import POLICIES, AdmissionDecision, LoadHistory
from .cache import CacheConfig, CacheState, IntervalEntry, PopularityTable
from .config import SimConfig, config_from_dict, load_config
from .disk import DiskParams
from .engine import Simulation, run
from .metrics import MetricsReport
from .workload import Catalog, Request, Video, WorkloadConfig, build_catalog

__version__ = "0.1.0"

__all__ = [
    "POLICIES",
    "AdmissionDecision",
    "CacheConfig",
    "CacheState",
    "Catalog",
    "DiskParams",
    "IntervalEntry",
    "LoadHistory",
    "MetricsReport",
    "PopularityTable",
    "Request",
    "SimConfig",
    "SimCore",
    "Simulation",
    "Video",
    "WorkloadConfig",
    "build_catalog",
    "config_from_dict",
    "get_core_class",
    "load_config",
    "run",
    "__version__",
]
