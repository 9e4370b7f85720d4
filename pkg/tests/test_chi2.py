import numpy as np
import pytest
from scipy import optimize, special, stats

from covadj.errors import ValidationError
from covadj.inference import chi2_cdf, chi2_quantile


def bisect_quantile(dof, alpha):
    """Independent oracle: bisection on the regularised incomplete gamma CDF."""
    target = 1.0 - alpha
    return optimize.bisect(lambda c: special.gammainc(dof / 2, c / 2) - target, 0.0, 200.0, xtol=1e-14, rtol=1e-15)


def test_known_values():
    assert chi2_quantile(2, 0.05) == pytest.approx(5.991465, abs=1e-6)
    assert chi2_quantile(1, 0.05) == pytest.approx(3.841459, abs=1e-6)
    assert chi2_quantile(1, 0.05) == pytest.approx(stats.norm.ppf(0.975) ** 2, abs=1e-9)
    # dof 2 has a closed form: -2 log(alpha)
    assert chi2_quantile(2, 0.05) == pytest.approx(-2 * np.log(0.05), abs=1e-12)


@pytest.mark.parametrize("dof", range(1, 7))
@pytest.mark.parametrize("alpha", [0.2, 0.1, 0.05, 0.01])
def test_matches_bisection_and_inverts_cdf(dof, alpha):
    c = chi2_quantile(dof, alpha)
    assert c == pytest.approx(bisect_quantile(dof, alpha), abs=1e-9)
    assert chi2_cdf(c, dof) == pytest.approx(1 - alpha, abs=1e-8)
    assert c == pytest.approx(stats.chi2.ppf(1 - alpha, dof), abs=1e-9)


def test_alpha_to_one_goes_to_zero():
    assert chi2_quantile(2, 1 - 1e-12) < 1e-10


@pytest.mark.parametrize("args", [(0, 0.05), (1.5, 0.05), (2, 0.0), (2, 1.0)])
def test_invalid(args):
    with pytest.raises(ValidationError):
        chi2_quantile(*args)


def test_cdf_nonpositive():
    assert chi2_cdf(0.0, 3) == 0.0
    assert chi2_cdf(-1.0, 3) == 0.0
