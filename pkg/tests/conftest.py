import numpy as np
import pytest

from sqglab.spectral import Grid


@pytest.fixture(scope="session")
def g16():
    return Grid(16)


@pytest.fixture(scope="session")
def g32():
    return Grid(32)


@pytest.fixture(scope="session")
def g64():
    return Grid(64)


def full_spectrum(values: np.ndarray) -> dict:
    """{(k1, k2): coefficient} over the full lattice, by a plain complex FFT."""
    n = values.shape[-1]
    c = np.fft.fft2(values) / n**2
    k = np.fft.fftfreq(n, 1.0 / n).astype(int)
    return {(int(a), int(b)): c[..., i, j] for i, a in enumerate(k) for j, b in enumerate(k)}


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
