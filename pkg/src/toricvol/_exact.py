"""Small exact linear algebra over ``fractions.Fraction``.

Matrices are sequences of rows. Everything here is written for the tiny
systems (n <= 4) that the polytope code needs; no pivoting heuristics beyond
"first nonzero entry".
"""
from fractions import Fraction
from math import gcd


def as_fraction(value):
    """Parse an int, Fraction or ``"p/q"`` string into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        if not value.is_integer():
            raise TypeError(f"refusing inexact float {value!r}; pass 'p/q'")
        return Fraction(int(value))
    # numpy integers and friends
    return Fraction(int(value))


def fraction_str(x):
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _all_int(rows):
    return all(type(x) is int for row in rows for x in row)


def det_int(rows):
    """Integer determinant by Bareiss fraction-free elimination."""
    m = [list(row) for row in rows]
    n = len(m)
    if n == 0:
        return 1
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if m[r][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def det(rows):
    """Determinant; exact integer path for integer input, Fractions otherwise."""
    if _all_int(rows):
        return Fraction(det_int(rows))
    m = [[Fraction(x) for x in row] for row in rows]
    n = len(m)
    sign = 1
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            sign = -sign
        p = m[col][col]
        result *= p
        for r in range(col + 1, n):
            if m[r][col] != 0:
                f = m[r][col] / p
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return sign * result


def solve(rows, rhs):
    """Solve the square system ``rows @ x = rhs``; return None if singular."""
    n = len(rows)
    if _all_int(rows) and all(type(b) is int or (isinstance(b, Fraction)
                                                  and b.denominator == 1)
                              for b in rhs):
        d = det_int(rows)
        if d == 0:
            return None
        rhs = [int(b) for b in rhs]
        out = []
        for i in range(n):
            mi = [row[:i] + [b] + row[i + 1:] for row, b in zip(map(list, rows), rhs)]
            out.append(Fraction(det_int(mi), d))
        return tuple(out)
    m = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(rows, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            return None
        m[col], m[pivot] = m[pivot], m[col]
        p = m[col][col]
        m[col] = [a / p for a in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return tuple(m[r][n] for r in range(n))


def rank_int(rows):
    """Rank of an integer matrix by fraction-free elimination."""
    m = [list(row) for row in rows]
    if not m:
        return 0
    r = 0
    for col in range(len(m[0])):
        pivot = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        p = m[r][col]
        for i in range(r + 1, len(m)):
            f = m[i][col]
            if f:
                m[i] = [a * p - f * b for a, b in zip(m[i], m[r])]
                g = 0
                for a in m[i]:
                    g = gcd(g, a)
                if g > 1:
                    m[i] = [a // g for a in m[i]]
        r += 1
        if r == len(m):
            break
    return r


def rank(rows):
    if _all_int(rows):
        return rank_int(rows)
    m = [[Fraction(x) for x in row] for row in rows]
    if not m:
        return 0
    ncols = len(m[0])
    r = 0
    for col in range(ncols):
        pivot = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        for i in range(r + 1, len(m)):
            if m[i][col] != 0:
                f = m[i][col] / m[r][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        r += 1
        if r == len(m):
            break
    return r


def affine_rank(points):
    """Dimension of the affine hull of ``points`` (-1 for the empty set)."""
    points = list(points)
    if not points:
        return -1
    p0 = points[0]
    q = 1
    for p in points:
        for a in p:
            if type(a) is not int:
                d = Fraction(a).denominator
                q = q * d // gcd(q, d)
    if q > 1 or not _all_int(points):
        points = [tuple(int(Fraction(a) * q) for a in p) for p in points]
        p0 = points[0]
    return rank([[a - b for a, b in zip(p, p0)] for p in points[1:]])


def cross(rows):
    """Generalized cross product of n-1 vectors in n-space.

    The result is orthogonal to every row; it vanishes iff the rows are
    linearly dependent. Integer input gives integer output.
    """
    n = len(rows) + 1
    out = []
    integer = _all_int(rows)
    for j in range(n):
        minor = [[row[k] for k in range(n) if k != j] for row in rows]
        if integer:
            d = det_int(minor)
        else:
            d = det(minor) if minor else Fraction(1)
        out.append(d if j % 2 == 0 else -d)
    return tuple(out)


def primitive(vec):
    """Scale a nonzero rational vector to the primitive integer vector on its ray.

    Returns ``(ints, factor)`` with ``ints == factor * vec`` and ``factor > 0``.
    """
    fr = [Fraction(x) for x in vec]
    lcm = 1
    for x in fr:
        lcm = lcm * x.denominator // gcd(lcm, x.denominator)
    ints = [int(x * lcm) for x in fr]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g == 0:
        raise ValueError("zero vector has no primitive representative")
    return tuple(x // g for x in ints), Fraction(lcm, g)


def mat_vec(m, v):
    return tuple(dot(row, v) for row in m)


def transpose(m):
    return [list(col) for col in zip(*m)]


def inverse(m):
    n = len(m)
    cols = []
    for j in range(n):
        e = [1 if i == j else 0 for i in range(n)]
        col = solve(m, e)
        if col is None:
            raise ZeroDivisionError("singular matrix")
        cols.append(col)
    return [list(row) for row in zip(*cols)]
