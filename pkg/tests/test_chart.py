import numpy as np
import pytest

from pnvcauchy.chart import (Boundary, ChartSpec, SubChart, build_chart, interior_mask, make_spec,
                             partial_derivative)
from pnvcauchy.errors import InvalidSpec
from pnvcauchy.report import observed_orders

from conftest import TWO_PI, box_chart, circle_chart, torus_chart


def test_spec_roundtrip():
    spec = make_spec([(0, 1), (-2, 3)], [16, 20], ["periodic", "open"])
    assert ChartSpec.from_dict(spec.to_dict()) == spec
    assert spec.boundary == (Boundary.PERIODIC, Boundary.OPEN)


def test_periodic_nodes_exclude_right_endpoint():
    c = circle_chart(16)
    assert c.axes[0][0] == 0.0
    assert c.axes[0][-1] == pytest.approx(TWO_PI - c.h)
    assert c.h == pytest.approx(TWO_PI / 16)


def test_open_nodes_include_both_ends():
    c = box_chart(11, dim=1)
    assert c.axes[0][0] == -1.0 and c.axes[0][-1] == 1.0
    assert c.h == pytest.approx(0.2)


@pytest.mark.parametrize("n, extents", [(7, (0, 1)), (16, (1, 1)), (16, (2, 1))])
def test_invalid_specs(n, extents):
    with pytest.raises(InvalidSpec):
        build_chart(make_spec([extents], n, "periodic"))


def test_refined_spec():
    spec = make_spec([(0, 1), (0, 1)], [16, 9], ["periodic", "open"])
    assert spec.refined(2).points == (32, 17)
    c0, c1 = build_chart(spec), build_chart(spec.refined(2))
    assert c1.spacing[1] == pytest.approx(c0.spacing[1] / 2)


def test_sine_derivative_accuracy_and_order():
    errs, hs = [], []
    for n in (32, 64):
        c = circle_chart(n)
        x = c.coords[0]
        errs.append(np.max(np.abs(c.d(np.sin(x), 0) - np.cos(x))))
        hs.append(c.h)
    assert errs[1] <= 1e-5
    assert observed_orders(errs, hs)[0] >= 3.9


def test_open_boundary_stencils_exact_for_quartics():
    c = box_chart(12, dim=1)
    x = c.coords[0]
    f = x**4 - 2 * x**3 + x
    assert np.max(np.abs(c.d(f, 0) - (4 * x**3 - 6 * x**2 + 1))) < 1e-11


def test_derivative_acts_on_leading_component_axes():
    c = torus_chart(16)
    x, y = c.coords
    T = np.stack([np.sin(x), np.cos(y)])
    d1 = c.d(T, 1)
    assert d1.shape == T.shape
    assert np.allclose(d1[0], 0.0)


def test_partial_derivative_rejects_bad_axis():
    c = torus_chart(16)
    with pytest.raises(IndexError):
        partial_derivative(c, c.coords[0], 2)
    with pytest.raises(ValueError):
        partial_derivative(c, np.zeros((3, 3)), 0)


def test_interior_mask():
    c = build_chart(make_spec([(0, 1), (0, 1)], [10, 10], ["open", "periodic"]))
    m = interior_mask(c, 2)
    assert m.sum() == 6 * 10
    assert not m[1].any() and m[2].all()


def test_subchart_maps_axes():
    c = build_chart(make_spec([(0, 1), (0, TWO_PI)], [10, 16], ["open", "periodic"]))
    sub = SubChart(c, 1, 1)
    f = np.sin(c.coords[1])
    assert np.allclose(sub.d(f, 0), c.d(f, 1))
