"""Discovery of single and combined causes of a binary target."""

from .baseline import naive_h
from .candidates import LevelPool, generate_level, redundancy_filter
from .citest import BudgetExceeded, CiResult, CITester, TestConfig, assoc_strength, ci, g2_test
from .dataset import (
    BinaryDataset,
    CombinedVariable,
    ContingencyTable,
    DataError,
    binarize,
    contingency,
    load_csv,
    materialize,
    write_csv,
)
from .hiton import build_open, hiton_pc, subset_search
from .mhpc import DiscoveryState, MhpcConfig, mh_pc
from .synth import GenSpec, GroundTruth, generate, preset

__version__ = "0.1.0"

__all__ = [
    "BinaryDataset", "BudgetExceeded", "CITester", "CiResult", "CombinedVariable",
    "ContingencyTable", "DataError", "DiscoveryState", "GenSpec", "GroundTruth", "LevelPool",
    "MhpcConfig", "TestConfig", "assoc_strength", "binarize", "build_open", "ci", "contingency",
    "g2_test", "generate", "generate_level", "hiton_pc", "load_csv", "materialize", "mh_pc",
    "naive_h", "preset", "redundancy_filter", "subset_search", "write_csv",
]
