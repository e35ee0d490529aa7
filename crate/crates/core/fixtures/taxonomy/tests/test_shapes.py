import unittest

from app.shapes import area, safe_area, total_area


def test_area_square():
    assert area(2, 2) == 4


def test_area_rect():
    assert area(2, 3) == 6


def test_area_zero():
    assert area(0, 5) == 0


def test_area_large():
    assert area(1000, 1000) == 1000000


def test_safe_area_ok():
    assert safe_area(3, 3) == 9


def test_total_area_ok():
    assert total_area([(1, 1), (2, 2)]) == 5


def test_safe_area_negative():
    assert safe_area(-1, 3) == 0


def test_total_area_three_bad():
    assert total_area([(-1, 1), (-2, 1), (-3, 1)]) == 0


def test_area_negative_height_raises():
    try:
        area(1, -1)
    except ValueError:
        return
    raise AssertionError("expected ValueError")


class AreaCase(unittest.TestCase):
    def test_area_negative_width_raises(self):
        with self.assertRaises(ValueError):
            area(-1, 1)
