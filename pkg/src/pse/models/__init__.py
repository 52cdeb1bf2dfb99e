"""Concrete structural models: monopoly pricing and the two-firm entry game."""
from .base import ModelDerivatives, PenaltyGrid, StructuralModel, uniform_grid
from .lambertw import lambert_w, lambert_w_contraction
from .monopoly import (
    MonopolyDataset,
    MonopolyModel,
    MonopolyMpecModel,
    MonopolyScalarModel,
    monopoly_eval,
    monopoly_solve,
)
from .entry import (
    EntryDataset,
    EntryGameModel,
    EntryMpecModel,
    EntryTheta,
    entry_best_response,
    entry_eval,
    entry_pseudo_loglik,
    entry_solve_equilibrium,
)

__all__ = [
    "ModelDerivatives",
    "PenaltyGrid",
    "StructuralModel",
    "uniform_grid",
    "lambert_w",
    "lambert_w_contraction",
    "MonopolyDataset",
    "MonopolyModel",
    "MonopolyMpecModel",
    "MonopolyScalarModel",
    "monopoly_eval",
    "monopoly_solve",
    "EntryDataset",
    "EntryGameModel",
    "EntryMpecModel",
    "EntryTheta",
    "entry_best_response",
    "entry_eval",
    "entry_pseudo_loglik",
    "entry_solve_equilibrium",
]
