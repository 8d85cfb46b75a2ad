import numpy as np
import pytest

from revfield.boundary import EdgeMap, Segmentation
from revfield.calculus import ScalarField
from revfield.render import (
    ImageSpec,
    curve_csv,
    edge_csv,
    quiver_csv,
    scalar_field_csv,
    segmentation_csv,
    segmentation_pgm,
    to_pgm,
)


def seg_of(assignment, k):
    return Segmentation(
        k=k,
        assignment=np.asarray(assignment),
        weights=(0.0, 0.0),
        objective=0.0,
        method="embedded-lloyd",
        iterations=1,
    )


# --- PGM ----------------------------------------------------------------------


def test_pgm_header_and_pixel_layout():
    # 3 wide in s, 2 tall in t; pixel (s, t) sits at offset t*S + s
    vals = np.array([[0.0, 1.0], [0.25, 0.5], [0.75, 1.0]])
    data = to_pgm(vals, ImageSpec("fixed", 0.0, 1.0))
    assert data.startswith(b"P5\n3 2\n255\n")
    body = data[len(b"P5\n3 2\n255\n") :]
    assert len(body) == 6
    assert body[0 * 3 + 0] == 0  # (s=0, t=0)
    assert body[0 * 3 + 2] == 191  # (s=2, t=0): 0.75 -> 191.25 rounds half-up down
    assert body[1 * 3 + 1] == 128  # (s=1, t=1): 0.5*255 = 127.5 rounds up


def test_pgm_fixed_range_known_bytes():
    vals = np.array([[0.0, 1.0], [0.5, 0.25]])  # S=2, T=2
    data = to_pgm(vals, ImageSpec("fixed", 0.0, 1.0))
    # t-major body: (0,0)=0, (1,0)=0.5->128, (0,1)=1->255, (1,1)=0.25->64
    assert data == b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64])


def test_pgm_minmax_endpoints_and_constant():
    vals = np.array([[3.0, 7.0], [5.0, 4.0]])
    body = to_pgm(vals)[len(b"P5\n2 2\n255\n") :]
    assert 0 in body and 255 in body
    flat = to_pgm(np.full((4, 3), 2.5))
    assert flat == b"P5\n4 3\n255\n" + bytes([128] * 12)


def test_pgm_clamps_outside_fixed_range():
    vals = np.array([[-10.0, 0.5, 10.0]]).T  # S=3, T=1
    body = to_pgm(vals, ImageSpec("fixed", 0.0, 1.0))[len(b"P5\n3 1\n255\n") :]
    assert list(body) == [0, 128, 255]


def test_pgm_monotone_under_fixed_normalization():
    rng = np.random.Generator(np.random.PCG64(0))
    vals = np.sort(rng.random(64)).reshape(64, 1)
    body = to_pgm(vals, ImageSpec("fixed", 0.0, 1.0))[len(b"P5\n64 1\n255\n") :]
    assert all(a <= b for a, b in zip(body, body[1:]))


def test_pgm_accepts_scalar_field():
    f = ScalarField(np.array([[0.0, 1.0]]), (0.0, 1.0))
    assert to_pgm(f, ImageSpec("fixed", 0.0, 1.0)).startswith(b"P5\n1 2\n255\n")


def test_pgm_input_validation():
    with pytest.raises(ValueError, match="non-finite"):
        to_pgm(np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError, match="2-D"):
        to_pgm(np.zeros(5))
    with pytest.raises(ValueError):
        ImageSpec("fixed", 1.0, 1.0)
    with pytest.raises(ValueError, match="unknown normalization"):
        ImageSpec("percentile")


# --- CSV ----------------------------------------------------------------------


def test_scalar_field_csv_layout():
    f = ScalarField(np.array([[1.0, 2.0], [1.0 / 3.0, 4.0]]), (1.0, 5.0))
    text = scalar_field_csv(f)
    lines = text.splitlines()
    assert lines[0] == "s,t,value"
    assert len(lines) == 5
    assert text.endswith("\n")
    # s-major: both t rows for s=0 come first
    assert lines[1] == "0,0,1"
    assert lines[2] == "0,5,2"
    assert lines[3] == "1,0,0.333333333"  # 9 significant digits
    assert lines[4] == "1,5,4"


def test_curve_csv():
    text = curve_csv("t", np.array([0.0, 2.0]), np.array([1.5, 2.25]))
    assert text == "t,value\n0,1.5\n2,2.25\n"
    with pytest.raises(ValueError):
        curve_csv("x", np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        curve_csv("s", np.zeros(2), np.zeros(3))


def test_edge_csv():
    flags = np.zeros((3, 2), dtype=bool)
    flags[2, 1] = True
    text = edge_csv(EdgeMap(flags), (4.0, 1.0))
    lines = text.splitlines()
    assert lines[0] == "s,t,flag"
    assert len(lines) == 7
    assert lines[-1] == "4,1,1"
    assert sum(line.endswith(",1") for line in lines[1:]) == 1


def test_segmentation_csv():
    seg = seg_of([[0, 1], [2, 1]], k=3)
    lines = segmentation_csv(seg, (1.0, 1.0)).splitlines()
    assert lines[0] == "s,t,cluster"
    assert lines[1:] == ["0,0,0", "0,1,1", "1,0,2", "1,1,1"]


def test_segmentation_pgm_gray_levels():
    seg = seg_of([[0, 1], [2, 0]], k=3)
    body = segmentation_pgm(seg)[len(b"P5\n2 2\n255\n") :]
    assert set(body) == {0, 128, 255}
    lone = segmentation_pgm(seg_of([[0, 0]], k=1))
    assert lone.endswith(bytes([128, 128]))


def test_quiver_csv():
    ds = ScalarField(np.array([[3.0]]), (0.0, 0.0))
    dt = ScalarField(np.array([[4.0]]), (0.0, 0.0))
    assert quiver_csv(ds, dt) == "s,t,ds,dt,magnitude\n0,0,3,4,5\n"
    bad = ScalarField(np.array([[1.0, 2.0]]), (0.0, 1.0))
    with pytest.raises(ValueError):
        quiver_csv(ds, bad)
