"""Data containers and the synthetic design generator."""

from src.datamodel.models import BetaType, CoefficientSpec, Dataset, SubmodelSplit  # noqa: F401

__all__ = ["BetaType", "CoefficientSpec", "Dataset", "SubmodelSplit"]
