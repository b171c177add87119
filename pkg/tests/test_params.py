import math

import mpmath as mp
import pytest

from ehldg.errors import ParameterDomainError
from ehldg.params import PhysicalInputs, derive, paper_defaults, roelands_exponent


def test_defaults_as_printed():
    d = paper_defaults()
    assert d.W == 1.3e-4
    assert d.h00_init == 0.0000015042
    assert d.p0 == 1.98e-8
    assert (d.eta0, d.Rx, d.G0, d.U, d.alpha) == (0.04, 0.02, 3500.0, 7.3e-11, 1.59e-8)


def test_roelands_exponent_matches_high_precision():
    mp.mp.dps = 40
    oracle = mp.mpf("1.59e-8") / (mp.mpf("5.1e-9") * (mp.log(mp.mpf("0.04")) + mp.mpf("9.67")))
    assert roelands_exponent(0.04, 1.59e-8) == pytest.approx(float(oracle), rel=1e-14)
    assert float(oracle) == pytest.approx(0.48327190334385939, rel=1e-14)


def test_log10_variant():
    z = roelands_exponent(0.04, 1.59e-8, "10")
    assert z == pytest.approx(1.59e-8 / (5.1e-9 * (math.log10(0.04) + 9.67)), rel=1e-15)


def test_modulus_and_derived_groups():
    d = derive(paper_defaults())
    assert d.E_prime == 3500.0 / 1.59e-8
    b = 4 * 0.02 / math.sqrt(1.3e-4 / (2 * math.pi))
    assert d.b == pytest.approx(b, rel=1e-15)
    assert d.b == pytest.approx(17.5877, rel=1e-5)
    assert d.pH == pytest.approx(d.E_prime * b / 0.08, rel=1e-15)
    assert d.lam == pytest.approx(12 * d.E_prime * 0.02**3 * 7.3e-11 / (b**3 * d.pH), rel=1e-14)


def test_z_override():
    inp = PhysicalInputs(**{**paper_defaults().__dict__, "z_override": 0.7})
    assert derive(inp).z == 0.7


def test_domain_errors_name_formula():
    with pytest.raises(ParameterDomainError, match="log"):
        roelands_exponent(-1.0, 1e-8)
    with pytest.raises(ParameterDomainError, match="z"):
        roelands_exponent(math.exp(-9.67) * 0.5, 1e-8)  # negative denominator
    with pytest.raises(ParameterDomainError):
        PhysicalInputs(**{**paper_defaults().__dict__, "W": 0.0})
    with pytest.raises(ParameterDomainError):
        PhysicalInputs(**{**paper_defaults().__dict__, "U": float("nan")})
    with pytest.raises(ParameterDomainError):
        derive(paper_defaults(), kind="ring")
