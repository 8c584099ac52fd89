def test_repeat():
    value = repeat("ab", 3)
    expected = "ababab"
    assert value == expected
