import math

import pytest

from holdergp.quadrature import QuadratureError, QuadSettings, integrate_interval, integrate_pieces, quad_piece


def test_smooth_integral():
    assert integrate_interval(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)


def test_endpoint_singularity():
    assert integrate_interval(lambda x: x**-0.5, 0.0, 1.0) == pytest.approx(2.0, rel=1e-9)


def test_pieces_sum():
    assert integrate_pieces(lambda x: x * x, [0.0, 0.25, 0.5, 1.0]) == pytest.approx(1 / 3, abs=1e-14)


def test_failure_is_reported():
    tight = QuadSettings(abs_tol=1e-14, rel_tol=1e-14, max_depth=1, slack=1.0, fail_rel=1e-14)
    with pytest.raises(QuadratureError):
        integrate_interval(lambda x: math.sin(1 / x) / x, 1e-6, 1.0, tight)


def test_quad_piece_empty_interval():
    assert quad_piece(math.exp, 0.3, 0.3) == (0.0, 0.0)
    assert QuadSettings(max_depth=40).limit == 80
