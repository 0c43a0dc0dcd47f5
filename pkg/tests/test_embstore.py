import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instrembed import (
    EmbeddingMatrix,
    FallbackEmbedderConfig,
    cosine,
    fallback_embed,
    read_embeddings,
    write_embeddings,
)
from instrembed.errors import VectorFormatError


def _random_matrix(n, d, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix.from_rows(
        [f"id{i}" for i in range(n)], rng.standard_normal((n, d))
    )


def test_round_trip_bit_identical(tmp_path):
    m = _random_matrix(5, 16, seed=1)
    p1, p2 = tmp_path / "a.iebv", tmp_path / "b.iebv"
    write_embeddings(m, p1)
    back = read_embeddings(p1)
    assert back.renormalized == 0
    write_embeddings(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert back.ids == m.ids
    assert np.array_equal(back.rows, m.rows)


def test_truncated_payload(tmp_path):
    m = _random_matrix(3, 4)
    p = tmp_path / "t.iebv"
    write_embeddings(m, p)
    data = bytearray(p.read_bytes())
    # claim 3 rows but drop one row of floats
    p.write_bytes(bytes(data[: 16 + 2 * 4 * 4]))
    with pytest.raises(VectorFormatError) as exc:
        read_embeddings(p)
    assert "truncated" in str(exc.value)
    assert exc.value.offset is not None


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.iebv"
    p.write_bytes(b"NOPE" + struct.pack("<III", 1, 0, 4))
    with pytest.raises(VectorFormatError) as exc:
        read_embeddings(p)
    assert exc.value.offset == 0


def test_id_count_mismatch(tmp_path):
    m = _random_matrix(2, 4)
    p = tmp_path / "ids.iebv"
    write_embeddings(m, p)
    data = p.read_bytes()
    # drop the last id entry entirely
    raw = m.ids[1].encode()
    p.write_bytes(data[: len(data) - 4 - len(raw)])
    with pytest.raises(VectorFormatError) as exc:
        read_embeddings(p)
    assert "id" in str(exc.value)


def test_trailing_garbage(tmp_path):
    m = _random_matrix(2, 4)
    p = tmp_path / "g.iebv"
    write_embeddings(m, p)
    p.write_bytes(p.read_bytes() + b"xx")
    with pytest.raises(VectorFormatError):
        read_embeddings(p)


def test_unnormalized_row_flagged(tmp_path):
    p = tmp_path / "n.iebv"
    rows = np.array([[2.0, 0.0], [0.0, 1.0]], dtype="<f4")
    ids = ["a", "b"]
    blob = b"IEBV" + struct.pack("<III", 1, 2, 2) + rows.tobytes()
    for id_ in ids:
        blob += struct.pack("<I", len(id_)) + id_.encode()
    p.write_bytes(blob)
    m = read_embeddings(p)
    assert m.renormalized == 1
    assert np.allclose(np.linalg.norm(m.rows, axis=1), 1.0, atol=1e-6)
    assert m.rows[0, 0] == pytest.approx(1.0)


def test_zero_row_rejected(tmp_path):
    p = tmp_path / "z.iebv"
    rows = np.zeros((1, 3), dtype="<f4")
    blob = b"IEBV" + struct.pack("<III", 1, 1, 3) + rows.tobytes()
    blob += struct.pack("<I", 1) + b"a"
    p.write_bytes(blob)
    with pytest.raises(VectorFormatError):
        read_embeddings(p)


def test_empty_matrix_round_trip(tmp_path):
    m = EmbeddingMatrix([], np.zeros((0, 8), dtype=np.float32))
    p = tmp_path / "e.iebv"
    write_embeddings(m, p)
    back = read_embeddings(p)
    assert len(back) == 0 and back.dim == 8


# --- cosine ------------------------------------------------------------------


def test_cosine_basics():
    assert cosine([1.0, 0.0], [1.0, 0.0]) == 1.0
    assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert cosine([1.0, 0.0], [-1.0, 0.0]) == -1.0


def test_cosine_errors():
    with pytest.raises(ValueError):
        cosine([1.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        cosine([0.0, 0.0], [1.0, 0.0])


def test_cosine_matches_high_precision_reference():
    from mpmath import mp, mpf

    mp.dps = 50
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(2, 24))
        a = rng.standard_normal(d)
        b = rng.standard_normal(d)
        got = cosine(a, b)
        dot = sum((mpf(float(x)) * mpf(float(y)) for x, y in zip(a, b)), mpf(0))
        na = sum((mpf(float(x)) ** 2 for x in a), mpf(0)) ** mpf("0.5")
        nb = sum((mpf(float(y)) ** 2 for y in b), mpf(0)) ** mpf("0.5")
        worst = max(worst, abs(got - float(dot / (na * nb))))
    assert worst <= 1e-12


# --- fallback embedder -------------------------------------------------------


def test_fallback_deterministic():
    m1 = fallback_embed(["same text here", "same text here"])
    assert cosine(m1.rows[0], m1.rows[1]) == pytest.approx(1.0, abs=1e-12)
    m2 = fallback_embed(["same text here", "same text here"])
    assert np.array_equal(m1.rows, m2.rows)


def test_fallback_disjoint_alphabets_near_orthogonal():
    rng = np.random.default_rng(0)
    left_alpha = list("abcdefghijklm")
    right_alpha = list("nopqrstuvwxyz")
    worst = 0.0
    for _ in range(100):
        lt = "".join(rng.choice(left_alpha, size=40))
        rt = "".join(rng.choice(right_alpha, size=40))
        m = fallback_embed([lt, rt])
        worst = max(worst, abs(cosine(m.rows[0], m.rows[1])))
    assert worst < 0.2


def test_fallback_empty_collection():
    m = fallback_embed([])
    assert len(m) == 0
    assert m.dim == 256


def test_fallback_config_validation():
    with pytest.raises(ValueError):
        FallbackEmbedderConfig(dim=4)
    with pytest.raises(ValueError):
        FallbackEmbedderConfig(ngram=0)


def test_fallback_seed_changes_vectors():
    a = fallback_embed(["hello world"], cfg=FallbackEmbedderConfig(seed=0))
    b = fallback_embed(["hello world"], cfg=FallbackEmbedderConfig(seed=1))
    assert not np.array_equal(a.rows, b.rows)


def test_fallback_short_text():
    m = fallback_embed(["a"], cfg=FallbackEmbedderConfig(ngram=3))
    assert np.linalg.norm(m.rows[0]) == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.text(min_size=1, max_size=60))
def test_fallback_unit_rows_property(text):
    try:
        m = fallback_embed([text])
    except ValueError:
        return  # all n-gram signs cancelled; zero vector is a contract error
    assert abs(np.linalg.norm(m.rows[0].astype(np.float64)) - 1.0) < 1e-6


def test_matrix_subset_and_lookup():
    m = _random_matrix(6, 4, seed=5)
    s = m.subset(["id3", "id1"])
    assert s.ids == ["id3", "id1"]
    assert np.array_equal(s.rows[0], m.row("id3"))
    assert "id1" in m and "nope" not in m
