def test_dot():
    left = [1, 2, 3]
    right = [4, 5, 6]
    assert dot(left, right) == 32
