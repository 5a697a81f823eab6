"""
Progress Display
================

Console banners and per-step progress for command-line runs. Everything is
printed to stderr so stdout stays free for emitted data.
"""

import sys
from typing import Dict, Sequence


def _print(text: str = "") -> None:
    print(text, file=sys.stderr)


def print_run_header(title: str, details: Dict[str, object]) -> None:
    """Print a formatted header for a run."""
    _print("\n" + "=" * 70)
    _print(f"  {title.upper()}")
    _print("=" * 70)
    for key, value in details.items():
        _print(f"  {key}: {value}")
    _print()


def print_step_progress(step: int, n_steps: int, population: float) -> None:
    percentage = (step / n_steps) * 100 if n_steps else 100.0
    _print(f"Step {step}/{n_steps} ({percentage:.0f}%): marked population {population:.6f}")


def print_run_summary(final_population: float, norm_drift: float, wall_time: float) -> None:
    _print(f"\nFinal marked population: {final_population:.6f}")
    _print(f"Norm drift: {norm_drift:.2e}   wall time: {wall_time:.1f}s")


def print_validation_summary(results: Sequence) -> None:
    """Print PASS/FAIL per check and the overall count."""
    passed = sum(1 for r in results if r.passed)
    for result in results:
        mark = "PASS" if result.passed else "FAIL"
        _print(f"  [{mark}] {result.name}: {result.detail}")
    total = len(results)
    percentage = (passed / total) * 100 if total else 0.0
    _print(f"\nValidation: {passed}/{total} checks passing ({percentage:.1f}%)")
