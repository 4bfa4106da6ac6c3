import json
import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergomix import kernel as K
from ergomix import serialize as S
from ergomix.models import worked_example
from fractions import Fraction


SPACES = [K.Torus(4, 2), K.Window(2, 3), K.Finite(7)]


@pytest.mark.parametrize("space", SPACES)
def test_space_and_distribution_roundtrip(space, rng):
    v = rng.random(space.size)
    dist = K.Distribution(space, v / v.sum() * 0.9, 0.1)
    assert S.space_from_dict(S.space_to_dict(space)) == space
    back = S.distribution_from_dict(json.loads(json.dumps(S.distribution_to_dict(dist))))
    assert back.space == space and back.escaped == 0.1
    assert np.array_equal(back.flat, dist.flat)


@pytest.mark.parametrize("space", SPACES)
def test_binary_sidecar(tmp_path, space, rng):
    dist = K.Distribution(space, rng.dirichlet(np.ones(space.size)))
    data, side = S.save_distribution_binary(dist, tmp_path / "d")
    assert data.stat().st_size == 8 * space.size
    meta = json.loads(side.read_text())
    assert meta["dtype"] == "float64-le" and meta["shape"] == list(space.shape)
    back = S.load_distribution_binary(tmp_path / "d")
    assert np.array_equal(back.values, dist.values) and back.space == space


def test_certificate_roundtrip():
    ch = K.discretize(worked_example(Fraction(1, 2)), 8)
    cert = K.doeblin_coefficient(ch, None, 2)
    back = S.certificate_from_dict(json.loads(S.dumps(S.certificate_to_dict(cert))))
    assert back.n0 == 2 and back.epsilon == cert.epsilon
    assert np.array_equal(back.lam.flat, cert.lam.flat)
    partial = K.DoeblinCertificate(3, 0.2, None, (0, 4))
    back = S.certificate_from_dict(S.certificate_to_dict(partial))
    assert (back.n0, back.epsilon, back.lam, back.set_A) == (3, 0.2, None, (0, 4))


def test_dumps_is_canonical():
    text = S.dumps({"b": float("nan"), "a": [np.float64(1.5), np.int64(2), float("inf"), np.bool_(True)]})
    assert json.loads(text) == {"a": [1.5, 2, "inf", True], "b": None}
    assert text.index('"a"') < text.index('"b"')
    assert "NaN" not in text and "Infinity" not in text
    assert S.dumps({"b": 1, "a": 2}) == S.dumps({"a": 2, "b": 1})


@given(st.lists(st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False)), max_size=20))
def test_sequence_csv_roundtrip(values):
    lines = S.sequence_csv(values, start=3).splitlines()
    assert lines[0] == "n,value"
    for i, (line, v) in enumerate(zip(lines[1:], values)):
        n, text = line.split(",")
        assert int(n) == i + 3
        assert (text == "" and v is None) or float(text) == v
