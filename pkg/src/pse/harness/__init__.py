"""Data simulation, Monte Carlo comparisons, report emission, and the CLI."""
from .simulate import (
    McConfig,
    McSummary,
    philox_stream,
    run_monte_carlo,
    simulate_entry,
    simulate_monopoly,
)
from .reports import (
    EntryFitCurve,
    emit_report,
    entry_fit_curve,
    load_markets_csv,
    load_monopoly_csv,
    read_report_csv,
    save_markets_csv,
    save_monopoly_csv,
)

__all__ = [
    "McConfig",
    "McSummary",
    "philox_stream",
    "run_monte_carlo",
    "simulate_entry",
    "simulate_monopoly",
    "EntryFitCurve",
    "emit_report",
    "entry_fit_curve",
    "load_markets_csv",
    "load_monopoly_csv",
    "read_report_csv",
    "save_markets_csv",
    "save_monopoly_csv",
]
