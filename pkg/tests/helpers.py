"""Shared fixtures for the test suite."""

import contextlib
import io
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

from collective import CollectiveOperators, MSBasis, build_collective_operators, build_ms_basis
from dynamics import IntegratorSettings
from hilbert import IonConfig, SectorBasis, build_sector_basis

FAST_SETTINGS = IntegratorSettings(rtol=1e-10, atol=1e-12)


@lru_cache(maxsize=None)
def sector(n_ions: int) -> SectorBasis:
    return build_sector_basis(IonConfig(n_ions))


@lru_cache(maxsize=None)
def all_ion_operators(n_ions: int) -> CollectiveOperators:
    basis = sector(n_ions)
    return build_collective_operators(basis, basis.config.all_ions)


@lru_cache(maxsize=None)
def ms_basis(n_ions: int) -> MSBasis:
    return build_ms_basis(sector(n_ions), all_ion_operators(n_ions))


def run_cli(argv: Sequence[str], main=None) -> Tuple[int, str, str]:
    """Run cli.main and capture (exit code, stdout, stderr)."""
    if main is None:
        from cli import main
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def data_lines(text: str, delimiter: Optional[str] = None) -> List[List[str]]:
    return [line.split(delimiter) for line in text.splitlines() if line and not line.startswith("#")]
