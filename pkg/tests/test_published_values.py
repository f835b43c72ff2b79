"""Benchmark constants shipped with the package, cross-checked against the reference text."""
import re
from pathlib import Path

import numpy as np
import pytest

from mrbisim.cli_io import (EXAMPLE2_U, EXAMPLE2_V, LINEAR_ROTATION, RESOLUTION_SWEEP,
                            STABLE_GENERATOR, benchmark_fixtures, discretized_linear,
                            example_merged, example_uniform)
from mrbisim.sysmodel import resolution_at

REFERENCE = Path(__file__).resolve().parents[1] / "paper.md"
pytestmark = pytest.mark.skipif(not REFERENCE.is_file(), reason="reference text not present")


@pytest.fixture(scope="module")
def text():
    return re.sub(r"\s+", " ", REFERENCE.read_text())


def test_sweep_rows(text):
    for eps, (states, secs) in RESOLUTION_SWEEP.items():
        assert re.search(rf"{eps} & {states} & {secs} &", text), eps


def test_fixture_sizes_and_samples(text):
    fx = {f.name: f for f in benchmark_fixtures()}
    lin = fx["linear_multires"].config
    assert lin["synthesis"]["k_init"] == 30 and lin["synthesis"]["N"] == 5000
    assert "$k=30$ abstract states and a dataset of $N = 5000$ transitions" in text
    assert "0.3||\\hat{\\ConState}|| + 0.5" in text
    assert fx["compactness"].config["synthesis"]["k_init"] == 150
    assert "initial guess $k=150$ abstract states, which, after refinement, lead to $171$" in text
    assert fx["compactness"].published["grid_states"] == 400 and "total of 400 abstract states" in text
    assert "\\eta = \\frac{\\sqrt{2}}{20}" in text and "\\tau = 0.05" in text
    quad = fx["non_incremental_stable"].config
    assert quad["domain"] == [[-0.5, 3.0], [-0.5, 5.0]] and "X=[-0.5,3]\\times[-0.5,5]" in text
    assert quad["synthesis"]["N"] == 10000 and "$N=10000$ samples" in text
    assert "decrease the initial abstract states to $k=300$" in text


def test_system_matrices(text):
    assert "0.4\\cdot\\begin{bmatrix} 1 & -1 \\\\ 1 & 1 \\end{bmatrix}" in text
    assert LINEAR_ROTATION == ["0.4*x0 - 0.4*x1", "0.4*x0 + 0.4*x1"]
    assert "- 7 & 1 \\\\ 8 & -10" in text
    assert STABLE_GENERATOR == [[-7.0, 1.0], [8.0, -10.0]]
    assert "0.5x_k \\\\ 0.5y_k + 0.5x_k^2" in text
    assert "3.2y_k^3" in text and "|y_k| < 0.5" in text and "0.8y_k" in text


def test_discretization_matches_matrix_exponential_series():
    # truncated Taylor series as an independent oracle for expm(0.05 A)
    A = 0.05 * np.array(STABLE_GENERATOR)
    M, term = np.eye(2), np.eye(2)
    for n in range(1, 20):
        term = term @ A / n
        M = M + term
    coeffs = [[float(t.split("*")[0]) for t in row.split(" + ")]
              for row in discretized_linear(STABLE_GENERATOR, 0.05)]
    assert np.allclose(coeffs, M, rtol=0, atol=1e-14)


def test_uniform_example(text):
    assert "$x_{k+1}=2x_k$ with $X=[1,16]$" in text and "exactly 16" in text
    system, spec, anchors, cells = example_uniform()
    assert sorted(anchors) == sorted(c * 0.5 ** k for c in (9, 11, 13, 15) for k in range(4))
    assert resolution_at(spec, [anchors[0]]) == 1.0
    assert system.evaluate([3.0])[0] == 6.0


def test_merged_example_resolution(text):
    assert "p(13)=3$ and $p(1)=0.5" in text
    # solve u*13 + v = 3, u*1 + v = 0.5 independently
    u, v = np.linalg.solve([[13, 1], [1, 1]], [3, 0.5])
    assert (EXAMPLE2_U, EXAMPLE2_V) == pytest.approx((u, v))
    _, spec, _, _ = example_merged()
    assert resolution_at(spec, [13.0]) == pytest.approx(3.0)
    assert resolution_at(spec, [1.0]) == pytest.approx(0.5)
