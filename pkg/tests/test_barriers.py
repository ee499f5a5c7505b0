import json
import math

import numpy as np
import pytest

from stiffhs.barriers import (decay_constant, make_decay_supersolution, make_expanding_subbarrier,
                              make_WT, verify_barrier, wt_identities)
from stiffhs.errors import BarrierConstructionError, DomainError
from stiffhs.model import GrowthLaw

LIN = GrowthLaw(1.0, 1.0, "linear")


def test_wt_closed_form():
    w = make_WT(1.0, 0.5, 2, 1.0)
    x = np.array([[0.5, 0.0], [0.0, 0.0]])
    # (g0/n)(R^2 e^{16 g0 t/n} - |x|^2)
    expect = 0.5 * (math.exp(8 * 0.1) - np.array([0.25, 0.0]))
    assert np.allclose(w(x, np.array([0.1, 0.1])), expect, rtol=1e-14)
    assert w.zero_radius(0.1) == pytest.approx(math.exp(0.4))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_wt_identities(n):
    # keep W moderate: stencil roundoff scales with |W| / h^2
    rep = wt_identities(make_WT(1.0, 0.2, n, 1.5), sample_count=2000)
    assert rep["laplacian_error"] < 1e-9
    assert rep["ratio_error"] < 1e-9


def test_wt_super_not_sub():
    w = make_WT(1.0, 0.5, 2, 1.0)
    assert verify_barrier(w, "super", 2000)["pass"]
    assert not verify_barrier(w, "sub", 2000)["pass"]


def test_expanding_subbarrier():
    sub = make_expanding_subbarrier(0.5, (0.0, 0.0), LIN)
    alpha, c = sub.params["alpha"], sub.params["c"]
    # both defining inequalities hold strictly
    assert float(LIN(4 * alpha)) > 4 * alpha
    assert c * (c + 0.5) < 2 * alpha * 0.25
    rep = verify_barrier(sub, "sub", 2000)
    assert rep["pass"] and rep["interior_margin"] > 0 and rep["boundary_margin"] > 0
    assert not verify_barrier(sub, "super", 2000)["pass"]


def test_subbarrier_errors():
    with pytest.raises(DomainError):
        make_expanding_subbarrier(1.5, (0.0,), LIN)
    with pytest.raises(DomainError):
        make_expanding_subbarrier(0.5, (0.0,), LIN, n=2)
    with pytest.raises(BarrierConstructionError):
        make_expanding_subbarrier(0.5, (0.0,), GrowthLaw(0.0, 1.0, "off"))


def test_decay_supersolution():
    cap = make_decay_supersolution(40, 2.0, LIN)
    assert cap.value(0.0) == pytest.approx(2.0)
    assert cap.value(1.0) < 2.0 and cap.value(1.0) > 1.0
    rep = verify_barrier(cap, "super", 2000)
    assert rep["pass"] and rep["interior_margin"] > 0
    assert not verify_barrier(cap, "sub", 2000)["pass"]
    assert decay_constant(LIN, 2.0) == 1.0


def test_decay_strictness():
    law = GrowthLaw(1.0, 0.1, "linear")
    with pytest.raises(BarrierConstructionError):
        make_decay_supersolution(40, 2.0, law)  # M p_max < 1
    soft = make_decay_supersolution(5, 2.0, law, strict=False)
    assert verify_barrier(soft, "super", 2000)["pass"]
    with pytest.raises(BarrierConstructionError):
        make_decay_supersolution(40, 2.0, GrowthLaw(1.0, 1.0, "constant-test"))


def test_report_is_json_and_deterministic():
    w = make_WT(1.0, 0.5, 2, 1.0)
    a = verify_barrier(w, "super", 512)
    b = verify_barrier(w, "super", 512)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert set(a) >= {"barrier", "kind", "params", "samples", "pass", "interior_margin"}


def test_window_checks():
    w = make_WT(1.0, 0.5, 2, 1.0)
    with pytest.raises(DomainError):
        verify_barrier(w, "super", 100, t_window=(0.0, 2.0))
    with pytest.raises(DomainError):
        verify_barrier(w, "both", 100)
    with pytest.raises(DomainError):
        make_WT(-1.0, 0.5, 2, 1.0)
