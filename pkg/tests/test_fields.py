import numpy as np
import pytest

from pnvcauchy.chart import make_spec
from pnvcauchy.errors import EmptyMask, SingularMetric, SlotOutOfRange
from pnvcauchy.fields import (Symmetry, TensorField, antisymmetric_part, component_norms, dump_field,
                              field_norm, load_field, lower_index, metric_inverse, min_eigenvalue,
                              pointwise_norm2, raise_index, sharp, symmetrize)


def _metric(shape=(5, 4), seed=0):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2) + shape) * 0.3
    return np.eye(2).reshape(2, 2, 1, 1) + symmetrize(A) * 0.5


def test_metric_inverse_roundtrip():
    g = _metric()
    gi = metric_inverse(g)
    prod = np.einsum("ij...,jk...->ik...", g, gi)
    assert np.allclose(prod, np.eye(2).reshape(2, 2, 1, 1))


def test_metric_inverse_reports_node():
    g = _metric()
    g[:, :, 3, 1] = [[1.0, 0.0], [0.0, -1.0]]
    with pytest.raises(SingularMetric) as info:
        metric_inverse(g)
    assert info.value.node == (3, 1)


def test_min_eigenvalue():
    g = np.zeros((2, 2, 3))
    g[0, 0], g[1, 1] = 2.0, 0.5
    assert min_eigenvalue(g) == pytest.approx(0.5)


def test_raise_lower_roundtrip():
    g = _metric()
    gi = metric_inverse(g)
    rng = np.random.default_rng(1)
    T = rng.normal(size=(2, 2, 5, 4))
    low, kinds = lower_index(T, g, 1, "uu")
    assert kinds == "ud"
    back, kinds = raise_index(low, gi, 1, kinds)
    assert kinds == "uu"
    assert np.allclose(back, T)


def test_slot_errors():
    g = _metric()
    with pytest.raises(SlotOutOfRange):
        lower_index(np.zeros((2, 5, 4)), g, 0, "d")
    with pytest.raises(SlotOutOfRange):
        raise_index(np.zeros((2, 5, 4)), g, 3, "d")


def test_sharp_matches_definition():
    g = _metric()
    gi = metric_inverse(g)
    h = symmetrize(np.random.default_rng(2).normal(size=(2, 2, 5, 4)))
    W = sharp(h, gi)
    assert np.allclose(np.einsum("ca...,cb...->ab...", g, W), h)


def test_symmetric_split():
    h = np.random.default_rng(3).normal(size=(2, 2, 3))
    assert np.allclose(symmetrize(h) + antisymmetric_part(h), h)


def test_norms_of_vector_field():
    g = np.zeros((2, 2, 4))
    g[0, 0], g[1, 1] = 4.0, 1.0
    X = np.zeros((2, 4))
    X[0] = [1.0, 2.0, 0.0, 0.0]
    gi = metric_inverse(g)
    assert np.allclose(pointwise_norm2(X, g, gi, "u"), [4.0, 16.0, 0.0, 0.0])
    assert field_norm(X, g, gi, "u", "linf") == pytest.approx(4.0)
    assert field_norm(X, g, gi, "u", "l2") == pytest.approx(np.sqrt(5.0))
    # norms of covectors use the inverse metric
    assert field_norm(X, g, gi, "d", "linf") == pytest.approx(1.0)


def test_empty_mask():
    g = _metric()
    with pytest.raises(EmptyMask):
        field_norm(np.zeros((2, 5, 4)), g, metric_inverse(g), "u", "linf", np.zeros((5, 4), bool))
    with pytest.raises(EmptyMask):
        component_norms(np.zeros((5, 4)), 0, np.zeros((5, 4), bool))


def test_component_norms_complex():
    R = np.array([[3.0 + 4.0j, 0.0], [0.0, 0.0]])
    assert component_norms(R, 1) == pytest.approx((5.0, np.sqrt(12.5)))


def test_tensor_field_shape_check():
    spec = make_spec([(0, 1), (0, 1)], [8, 8], "periodic")
    TensorField(spec, np.zeros((2, 8, 8)), "u")
    with pytest.raises(ValueError):
        TensorField(spec, np.zeros((3, 8, 8)), "u")


@pytest.mark.parametrize("complex_", [False, True])
def test_dump_roundtrip(tmp_path, complex_):
    spec = make_spec([(0, 1), (0, 2)], [8, 9], ["periodic", "open"])
    rng = np.random.default_rng(4)
    data = rng.normal(size=(2, 2, 8, 9))
    if complex_:
        data = data + 1j * rng.normal(size=data.shape)
    f = TensorField(spec, data, "dd", Symmetry.NONE, False)
    p = tmp_path / "f.pnvdump"
    dump_field(p, f, {"t": 0.5})
    g, header = load_field(p)
    assert header["format"] == "pnv-grid-dump" and header["complex"] == complex_
    assert header["extra"] == {"t": 0.5}
    assert g.spec == spec and g.kinds == "dd"
    assert np.array_equal(g.data, data)
    # header line then exactly the payload bytes
    raw = p.read_bytes()
    assert len(raw) - raw.index(b"\n") - 1 == data.size * (16 if complex_ else 8)
