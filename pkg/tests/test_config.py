import numpy as np
import pytest
import yaml
from hypothesis import given, strategies as st

from cgmsfem import config as C


@pytest.mark.parametrize("name", C.PRESET_NAMES)
def test_presets_validate_and_round_trip(name, tmp_path):
    cfg = C.preset(name)
    p = tmp_path / "c.yaml"
    C.dump(cfg, p)
    again = C.load(p)
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_reference_presets_carry_coupling_coefficients():
    assert (C.preset("periodic").basis.gamma1, C.preset("periodic").basis.gamma2) == (0.4, 0.04)
    assert (C.preset("test-a").basis.gamma1, C.preset("test-a").basis.gamma2) == (0.75, 0.07)
    tb = C.preset("test-b")
    assert (tb.basis.gamma1, tb.basis.gamma2) == (0.7, 8.0e-6)
    assert tb.samples == 30
    assert tb.material.kle["kappa"].length == 0.01 and tb.material.kle["kappa"].terms == 50


@given(nx=st.sampled_from([8, 12, 16]), seed=st.integers(0, 10 ** 6), L=st.lists(st.integers(1, 20), min_size=1, max_size=4),
       g1=st.floats(-2, 2, allow_nan=False))
def test_yaml_round_trip_is_lossless(nx, seed, L, g1):
    cfg = C.preset("periodic-desk").replace(seed=seed)
    cfg.mesh.nx = cfg.mesh.ny = nx
    cfg.mesh.Nx = cfg.mesh.Ny = 4
    cfg.material.period = 4
    cfg.basis.L = L
    cfg.basis.gamma1 = g1
    assert C.from_dict(yaml.safe_load(cfg.to_yaml())) == cfg


def test_digest_ignores_output_directory():
    cfg = C.preset("test-a-desk")
    assert cfg.replace(out="elsewhere").digest() == cfg.digest()
    assert cfg.replace(seed=9).digest() != cfg.digest()


@pytest.mark.parametrize("patch,where", [
    ({"mesh": {"nx": 10, "Nx": 3}}, "mesh"),
    ({"mesh": {"bogus": 1}}, "config.mesh.bogus"),
    ({"time": {"tau": 0.3}}, "time.tau"),
    ({"material": {"source": "foam"}}, "material.source"),
    ({"sources": {"g": "import_os(1)"}}, "sources.g"),
    ({"sources": {"f": ["1"]}}, "sources.f"),
    ({"basis": {"L": [4, 0]}}, "basis.L[1]"),
    ({"methods": ["fine", "fem"]}, "methods[1]"),
    ({"store": "some"}, "store"),
])
def test_validation_errors_name_the_field(patch, where):
    d = C.preset("periodic-desk").to_dict()
    for k, v in patch.items():
        if isinstance(v, dict):
            d[k].update(v)
        else:
            d[k] = v
    with pytest.raises(C.ConfigError, match=where.replace("[", r"\[").replace("]", r"\]")):
        C.from_dict(d)


def test_unknown_preset():
    with pytest.raises(C.ConfigError):
        C.preset("table-9")


def test_expressions():
    x = np.array([0.0, 0.5, 1.0])
    g = C.compile_expression("gauss_test_a")
    assert g(np.array([0.2]), np.array([0.4]), 0.0)[0] == pytest.approx(10.0)
    assert np.allclose(C.compile_expression("cos_test_a")(x, 0 * x, 0.0), np.cos(np.pi * x) + 1.5)
    assert np.allclose(C.compile_expression("2*t + x")(x, x, 1.5), 3 + x)
    fx, fy = C.compile_vector(["x", "1"])(x, x, 0.0)
    assert np.allclose(fx, x) and np.allclose(fy, 1)
    with pytest.raises(C.ConfigError):
        C.compile_expression("__import__('os')")
    with pytest.raises(C.ConfigError):
        C.compile_expression("x +")
