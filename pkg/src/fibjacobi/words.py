"""Fibonacci substitution words, hull windows, and Sturmian combinatorics.

The substitution S(a) = ab, S(b) = a has a unique one-sided fixed point
u = abaababaabaab..., the Fibonacci word.  Everything spectral in this
package is driven by finite windows of the two-sided sequence obtained by
iterating S^2 on the seed b|a: to the right of the origin it coincides
with u, to the left it is the limit of S^(2m)(b) ending at position 0.

Words are plain strings over the alphabet "ab".  Positions in two-sided
windows are integers; position 1 is the first letter of u.
"""

from __future__ import annotations

from dataclasses import dataclass

LETTER_A = "a"
LETTER_B = "b"
ALPHABET = "ab"

# Hard cap on materialized letters; generating beyond this is a caller bug,
# not a meaningful computation.
_MAX_LETTERS = 50_000_000

_SUBST = {LETTER_A: "ab", LETTER_B: "a"}


class WordLengthError(ValueError):
    """Requested word would exceed the materialization cap."""


class InsufficientDepthError(ValueError):
    """Substitution depth too small for a stable factor set."""


class WindowCoverageError(ValueError):
    """A SignedWindow does not cover the positions an operation needs."""


def fibonacci(k: int) -> int:
    """F_k with F_0 = F_1 = 1, F_{k+1} = F_k + F_{k-1}.

    Python integers are arbitrary precision, so no wrapping can occur.
    """
    if k < 0:
        raise ValueError(f"fibonacci index must be >= 0, got {k}")
    f_prev, f_cur = 1, 1
    for _ in range(k):
        f_prev, f_cur = f_cur, f_prev + f_cur
    return f_prev


def substitute(w: str) -> str:
    """Image of a word under S(a) = ab, S(b) = a, extended by concatenation."""
    _check_word(w)
    return "".join(_SUBST[c] for c in w)


def fib_prefix(k: int) -> str:
    """Prefix s_k of u of length F_k; s_1 = "a", s_2 = "ab", s_{k+1} = s_k s_{k-1}."""
    if k < 1:
        raise ValueError(f"fib_prefix requires k >= 1, got {k}")
    if fibonacci(k) > _MAX_LETTERS:
        raise WordLengthError(f"fib_prefix({k}) has {fibonacci(k)} letters, over the cap")
    s_prev, s_cur = "a", "ab"  # s_1, s_2
    if k == 1:
        return s_prev
    for _ in range(k - 2):
        s_prev, s_cur = s_cur, s_cur + s_prev
    return s_cur


@dataclass(frozen=True)
class SignedWindow:
    """Letters of a hull sequence on the integer positions lo..hi inclusive."""

    lo: int
    hi: int
    letters: str

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"window requires lo <= hi, got ({self.lo}, {self.hi})")
        if len(self.letters) != self.hi - self.lo + 1:
            raise ValueError(
                f"window ({self.lo}, {self.hi}) needs {self.hi - self.lo + 1} "
                f"letters, got {len(self.letters)}"
            )
        _check_word(self.letters)

    def letter(self, n: int) -> str:
        if not self.lo <= n <= self.hi:
            raise WindowCoverageError(f"position {n} outside window ({self.lo}, {self.hi})")
        return self.letters[n - self.lo]

    def slice(self, lo: int, hi: int) -> str:
        """Letters on positions lo..hi inclusive."""
        if lo > hi:
            raise ValueError("slice requires lo <= hi")
        if lo < self.lo or hi > self.hi:
            raise WindowCoverageError(
                f"slice ({lo}, {hi}) outside window ({self.lo}, {self.hi})"
            )
        return self.letters[lo - self.lo : hi - self.lo + 1]

    def covers(self, lo: int, hi: int) -> bool:
        return self.lo <= lo and hi <= self.hi


def window_from_word(w: str, lo: int = 1) -> SignedWindow:
    """Wrap a plain word as a window starting at position lo (default 1)."""
    return SignedWindow(lo, lo + len(w) - 1, w)


def periodize(w: str, n_letters: int, lo: int = 1) -> SignedWindow:
    """Window of n_letters letters starting at position lo, repeating w."""
    if not w:
        raise ValueError("cannot periodize the empty word")
    if n_letters > _MAX_LETTERS:
        raise WordLengthError(f"periodization of {n_letters} letters over the cap")
    reps = -(-n_letters // len(w))
    return SignedWindow(lo, lo + n_letters - 1, (w * reps)[:n_letters])


def omega_s(lo: int, hi: int) -> SignedWindow:
    """Window of the special hull element on positions lo..hi.

    Positions n >= 1 carry u_n.  Positions n <= 0 carry the limit of
    S^(2m)(b) aligned so its last letter sits at position 0; since
    S^(2m)(b) = s_{2m} and s_{2m+2} ends with s_{2m}, the suffixes
    stabilize and the left half-line is well defined.
    """
    if lo > hi:
        raise ValueError(f"omega_s requires lo <= hi, got ({lo}, {hi})")
    if hi - lo + 1 > _MAX_LETTERS:
        raise WordLengthError(f"omega_s window of {hi - lo + 1} letters over the cap")
    right = ""
    if hi >= 1:
        k = 1
        while fibonacci(k) < hi:
            k += 1
        right = fib_prefix(k)[: hi]
    left = ""
    if lo <= 0:
        need = 1 - lo  # letters on positions lo..0
        m = 2
        while fibonacci(m) < need:
            m += 2
        src = fib_prefix(m)  # equals S^m(b) for even m
        left = src[len(src) - need :]
    if lo >= 1:
        letters = right[lo - 1 :]
    elif hi <= 0:
        letters = left
    else:
        letters = left + right
    return SignedWindow(lo, hi, letters)


def subwords(L: int, depth: int | None = None) -> set[str]:
    """All length-L factors of u, enumerated from S^depth(a).

    depth defaults to the smallest m with F_{m+1} >= 3L + 4; every length-L
    factor already occurs in a prefix of length about phi^2 L ~ 2.62 L, so
    that is deep enough for the factor set to have stabilized.  The result
    must have exactly L + 1 elements (Sturmian complexity); a smaller count
    means the depth was insufficient and is reported as such.
    """
    if L < 1:
        raise ValueError(f"subwords requires L >= 1, got {L}")
    min_depth = _stable_depth(L)
    if depth is None:
        depth = min_depth
    if depth < 1:
        raise InsufficientDepthError(f"depth must be >= 1, got {depth}")
    length = fibonacci(depth + 1)  # |S^depth(a)|
    if length < L:
        raise InsufficientDepthError(
            f"S^{depth}(a) has {length} letters, shorter than L = {L}"
        )
    if length > _MAX_LETTERS:
        raise WordLengthError(f"S^{depth}(a) has {length} letters, over the cap")
    word = fib_prefix(depth + 1)
    found = {word[i : i + L] for i in range(length - L + 1)}
    if len(found) != L + 1:
        raise InsufficientDepthError(
            f"factor set of length {L} at depth {depth} has {len(found)} "
            f"elements, expected {L + 1}; increase depth (>= {min_depth})"
        )
    return found


def _stable_depth(L: int) -> int:
    m = 1
    while fibonacci(m + 1) < 3 * L + 4:
        m += 1
    return m


def cyclic_conjugates(k: int) -> list[str]:
    """All rotations of S^k(a), starting from S^k(a) itself.

    S^k(a) is primitive, so the rotations are pairwise distinct; this is
    asserted rather than silently deduplicated.
    """
    if k < 1:
        raise ValueError(f"cyclic_conjugates requires k >= 1, got {k}")
    base = fib_prefix(k + 1)  # S^k(a) = s_{k+1}
    rotations = [base[i:] + base[:i] for i in range(len(base))]
    if len(set(rotations)) != len(rotations):
        raise AssertionError(f"rotations of S^{k}(a) are not distinct")
    return rotations


def square_prefix_block(k: int) -> int:
    """Length of the square half-block checked at level k: |S^k(a)| = F_{k+1}."""
    if k < 1:
        raise ValueError(f"square level must be >= 1, got {k}")
    return fibonacci(k + 1)


def square_prefix_check(w: SignedWindow, k: int) -> bool:
    """Whether the restriction of w to n >= 1 begins with a level-k square.

    True iff the first n = |S^k(a)| letters (positions 1..n) repeat exactly
    on positions n+1..2n and form a cyclic conjugate of S^k(a).  Holds for
    the special element at every k >= 2; k = 1 is false there (u starts
    "ab aa", which is not a square).
    """
    n = square_prefix_block(k)
    if not w.covers(1, 2 * n):
        raise WindowCoverageError(
            f"square check at level {k} needs positions 1..{2 * n}, "
            f"window covers ({w.lo}, {w.hi})"
        )
    first = w.slice(1, n)
    second = w.slice(n + 1, 2 * n)
    if first != second:
        return False
    return first in cyclic_conjugates(k)


def _check_word(w: str) -> None:
    bad = set(w) - set(ALPHABET)
    if bad:
        raise ValueError(f"word contains letters outside 'ab': {sorted(bad)!r}")
