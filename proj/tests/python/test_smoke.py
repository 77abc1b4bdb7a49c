"""Smoke tests of the python extension module."""

import math
import os

import numpy as np
import pytest

import wrapfit as wf


def test_wrap_values():
    out = wf.wrap(np.array([-math.pi / 2, 7.0]))
    assert out[0] == pytest.approx(3 * math.pi / 2)
    assert out[1] == pytest.approx(7.0 - 2 * math.pi)


def test_wrapped_density_value():
    v = wf.wrapped_density(np.array([0.0]), np.array([0.0]),
                           np.array([[(math.pi / 8) ** 2]]), J=3)
    assert v == pytest.approx(1.0158981749478557, abs=1e-9)


def test_chi2_quantile():
    assert wf.chi2_quantile(0.99, 2) == pytest.approx(9.21034037, abs=1e-6)


def test_sigma_unwrapped():
    assert wf.sigma_unwrapped(3 * math.pi / 8) == pytest.approx(1.163, abs=5e-3)
    assert wf.sigma_unwrapped(math.pi / 2) == pytest.approx(1.460, abs=5e-3)


def test_fit_and_detect_on_contaminated_sample():
    data, mask, mu_true, sigma_true = wf.generate_contaminated(
        200, 2, math.pi / 8, eps=0.2, k_eps=math.pi, seed=11)
    mask = np.asarray(mask)

    robust = wf.fit(data, "wcem-unwrap", bandwidth=0.25, seed=3)
    assert robust.converged
    assert wf.sqrt_average_separation(robust.mu, mu_true) < 0.1

    plain = wf.fit(data, "em", seed=3)
    assert wf.sqrt_average_separation(plain.mu, mu_true) > 0.15

    det = wf.detect_outliers(robust, alpha=0.01)
    flags = np.asarray(det["flags"])
    assert flags[mask].mean() >= 0.95
    assert flags[~mask].mean() <= 0.05
    assert det["cutoff"] == pytest.approx(9.21034, abs=1e-4)

    w = np.asarray(robust.weights)
    assert np.median(w[mask]) < 0.1
    assert np.median(w[~mask]) > 0.9


def test_fixture_roundtrip(tmp_path):
    data_dir = os.environ.get("WRAPFIT_DATA_DIR")
    if not data_dir:
        pytest.skip("fixture directory not provided")
    table = np.loadtxt(os.path.join(data_dir, "tim_synthetic.csv"),
                       delimiter=",", skiprows=1)
    assert table.shape == (490, 2)
    assert float(table.min()) >= 0.0
    assert float(table.max()) < 2 * math.pi


def test_influence_shapes():
    z = np.linspace(-2 * math.pi, 2 * math.pi, 181)
    wem = wf.influence_location(z, scheme="wem", eps=0.1)
    per = np.abs(wem[:90] - wem[90:180])
    # the grid repeats after half its length (z + 2 pi)
    assert per.max() < 1e-6 * np.abs(wem).max()

    unw = wf.influence_location(z, scheme="wcem-unwrap", eps=0.1)
    outside = np.abs(z) > math.pi + 1.4
    assert np.abs(unw[outside]).max() < 0.02 * np.abs(unw).max()
