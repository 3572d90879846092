"""Python access to the betamask edge-mask explainers."""

from ._betamask import (
    ConfusionCounts,
    Dataset,
    Graph,
    Model,
    accuracy,
    confusion,
    explain,
    f1,
    generate,
    jaccard,
    mann_whitney_u,
    preset_names,
    run_cli,
    train,
    unfaithfulness,
)

__all__ = [
    "ConfusionCounts",
    "Dataset",
    "Graph",
    "Model",
    "accuracy",
    "confusion",
    "explain",
    "f1",
    "generate",
    "jaccard",
    "mann_whitney_u",
    "preset_names",
    "run_cli",
    "train",
    "unfaithfulness",
]
