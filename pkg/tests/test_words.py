"""Combinatorial oracles for the substitution-word layer.

Small cases are written out by hand; structural identities (prefix
recursion, suffix stabilization, Sturmian complexity) are checked over
ranges large enough to exercise the generation code paths.
"""

import pytest

from fibjacobi.words import (
    InsufficientDepthError,
    SignedWindow,
    WindowCoverageError,
    WordLengthError,
    cyclic_conjugates,
    fib_prefix,
    fibonacci,
    omega_s,
    periodize,
    square_prefix_block,
    square_prefix_check,
    substitute,
    subwords,
    window_from_word,
)


def test_fibonacci_values():
    assert [fibonacci(k) for k in range(11)] == [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89]
    with pytest.raises(ValueError):
        fibonacci(-1)


def test_fibonacci_no_overflow():
    # Arbitrary-precision integers: F_300 is exact and positive.
    f = fibonacci(300)
    assert f > 10**60
    assert fibonacci(300) == fibonacci(299) + fibonacci(298)


def test_substitute_base_cases():
    assert substitute("a") == "ab"
    assert substitute("b") == "a"
    assert substitute("ab") == "aba"
    assert substitute("aba") == "abaab"
    assert substitute("abaab") == "abaababa"
    with pytest.raises(ValueError):
        substitute("abc")


def test_fib_prefix_small():
    assert fib_prefix(1) == "a"
    assert fib_prefix(2) == "ab"
    assert fib_prefix(3) == "aba"
    assert fib_prefix(4) == "abaab"
    assert fib_prefix(5) == "abaababa"
    with pytest.raises(ValueError):
        fib_prefix(0)


def test_fib_prefix_recursion():
    for k in range(3, 26):
        assert fib_prefix(k) == fib_prefix(k - 1) + fib_prefix(k - 2)
        assert len(fib_prefix(k)) == fibonacci(k)


def test_fib_prefix_is_substitution_iterate():
    w = "a"
    for k in range(1, 15):
        assert fib_prefix(k) == w
        w = substitute(w)


def test_fib_prefix_cap():
    with pytest.raises(WordLengthError):
        fib_prefix(60)


def test_signed_window_basics():
    w = SignedWindow(-2, 3, "aababa")
    assert w.letter(-2) == "a"
    assert w.letter(0) == "b"
    assert w.letter(1) == "a"
    assert w.slice(-1, 1) == "aba"
    assert w.covers(-2, 3)
    assert not w.covers(-3, 0)
    with pytest.raises(WindowCoverageError):
        w.letter(4)
    with pytest.raises(WindowCoverageError):
        w.slice(0, 5)
    with pytest.raises(ValueError):
        SignedWindow(2, 1, "")
    with pytest.raises(ValueError):
        SignedWindow(1, 3, "ab")


def test_window_from_word_and_periodize():
    w = window_from_word("abaab")
    assert (w.lo, w.hi, w.letters) == (1, 5, "abaab")
    p = periodize("ab", 5)
    assert p.letters == "ababa"
    p2 = periodize("aba", 7, lo=0)
    assert (p2.lo, p2.hi, p2.letters) == (0, 6, "abaabaa")
    with pytest.raises(ValueError):
        periodize("", 3)


def test_omega_s_right_half_is_fibonacci_word():
    assert omega_s(1, 5).letters == "abaab"
    assert omega_s(1, 13).letters == "abaababaabaab"
    for k in range(1, 26):
        assert omega_s(1, fibonacci(k)).letters == fib_prefix(k)


def test_omega_s_left_half():
    # Left of the origin is the stable suffix of the even prefixes.
    assert omega_s(0, 0).letters == "b"
    assert omega_s(-1, 0).letters == "ab"
    assert omega_s(-2, 0).letters == "aab"
    assert omega_s(-4, 0).letters == "abaab"
    n = fibonacci(12)
    assert omega_s(1 - n, 0).letters == fib_prefix(12)


def test_omega_s_left_suffixes_stabilize():
    # s_{2m+2} ends with s_{2m}, so deeper iterates agree on any window.
    for m in range(2, 12, 2):
        assert fib_prefix(m + 2).endswith(fib_prefix(m))


def test_omega_s_two_sided():
    assert omega_s(-2, 3).letters == "aababa"
    w = omega_s(-8, 8)
    assert w.slice(1, 8) == fib_prefix(5)
    assert w.slice(-7, 0) == fib_prefix(6)[-8:]


def test_omega_s_argument_validation():
    with pytest.raises(ValueError):
        omega_s(3, 1)


def test_subwords_small():
    assert subwords(1) == {"a", "b"}
    assert subwords(2) == {"ab", "ba", "aa"}
    assert subwords(3) == {"aba", "baa", "aab", "bab"}


def test_subwords_complexity():
    # Sturmian complexity: exactly L + 1 factors of each length.
    for L in range(1, 51):
        facs = subwords(L)
        assert len(facs) == L + 1
        for f in facs:
            assert "bb" not in f
            assert "aaa" not in f


def test_subwords_depth_control():
    assert subwords(3, depth=8) == subwords(3)
    with pytest.raises(InsufficientDepthError):
        subwords(10, depth=2)
    with pytest.raises(ValueError):
        subwords(0)


def test_cyclic_conjugates_small():
    assert cyclic_conjugates(1) == ["ab", "ba"]
    assert cyclic_conjugates(2) == ["aba", "baa", "aab"]
    assert cyclic_conjugates(3) == ["abaab", "baaba", "aabab", "ababa", "babaa"]


def test_cyclic_conjugates_distinct():
    for k in range(1, 12):
        rots = cyclic_conjugates(k)
        assert len(rots) == fibonacci(k + 1)
        assert len(set(rots)) == len(rots)
        assert rots[0] == fib_prefix(k + 1)


def test_square_prefix_block_lengths():
    assert [square_prefix_block(k) for k in range(1, 6)] == [2, 3, 5, 8, 13]


def test_square_prefix_check_on_hull_element():
    # The one-sided word starts with a repeated level-k block for k >= 2.
    for k in range(2, 16):
        w = omega_s(1, 2 * square_prefix_block(k))
        assert square_prefix_check(w, k)


def test_square_prefix_check_fails_at_level_one():
    # Positions 1..4 read "abaa": halves "ab" and "aa" differ.
    w = omega_s(1, 4)
    assert not square_prefix_check(w, 1)


def test_square_prefix_check_conjugate_requirement():
    # An exact square of a conjugate passes; a square of a non-factor fails.
    w = window_from_word("baaba" * 2)
    assert square_prefix_check(w, 3)
    bad = window_from_word("babab" * 2)
    assert not square_prefix_check(bad, 3)


def test_square_prefix_check_window_too_short():
    with pytest.raises(WindowCoverageError):
        square_prefix_check(omega_s(1, 5), 2)
    # A window missing position 1 cannot be checked even if it is long.
    with pytest.raises(WindowCoverageError):
        square_prefix_check(window_from_word("ab" * 5, lo=2), 2)
