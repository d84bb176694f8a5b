"""
Dense univariate polynomials over GF(p).

Polynomials are lists of residues ordered from the leading coefficient down
to the constant term; the zero polynomial is the empty list.
"""


def gf_strip(f):
    """Removes leading zeros."""
    for i, c in enumerate(f):
        if c:
            return list(f[i:])
    return []


def gf_degree(f):
    """Degree of ``f``; -1 for the zero polynomial."""
    return len(gf_strip(f)) - 1


def gf_monic(f, p):
    """
    Scales ``f`` to leading coefficient one.

    Returns:
        tuple: The former leading coefficient and the monic polynomial.
    """
    f = gf_strip(f)
    if not f:
        return 0, []
    lc = f[0]
    inv = pow(lc, -1, p)
    return lc, [c * inv % p for c in f]


def gf_rem(f, g, p):
    """Remainder of ``f`` divided by ``g`` in GF(p)[x]."""
    f, g = gf_strip(f), gf_strip(g)
    if not g:
        raise ZeroDivisionError("polynomial division by zero")
    inv = pow(g[0], -1, p)
    f = list(f)
    while len(f) >= len(g):
        q = f[0] * inv % p
        for i, c in enumerate(g):
            f[i] = (f[i] - q * c) % p
        f = gf_strip(f)
    return f


def gf_gcd(f, g, p):
    """Monic gcd via the Euclidean algorithm."""
    f, g = gf_strip(f), gf_strip(g)
    while g:
        f, g = g, gf_rem(f, g, p)
    return gf_monic(f, p)[1]


def gf_interpolate(xs, ys, p):
    """
    Lagrange interpolation through the points (xs[i], ys[i]).

    Args:
        xs (list[int]): Distinct evaluation points.
        ys (list[int]): Values at those points.
        p (int): Field prime.

    Returns:
        list[int]: The unique polynomial of degree < len(xs).
    """
    if len(set(x % p for x in xs)) != len(xs):
        raise ValueError("Interpolation points must be distinct modulo p")
    n = len(xs)
    # coefficients lowest degree first while building
    result = [0] * n
    for i in range(n):
        if ys[i] % p == 0:
            continue
        basis = [1]
        denom = 1
        for j in range(n):
            if j == i:
                continue
            # basis *= (x - xs[j])
            shifted = [0] + basis
            for t in range(len(basis)):
                shifted[t] = (shifted[t] - xs[j] * basis[t]) % p
            basis = shifted
            denom = denom * (xs[i] - xs[j]) % p
        scale = ys[i] * pow(denom, -1, p) % p
        for t, c in enumerate(basis):
            result[t] = (result[t] + scale * c) % p
    return gf_strip(result[::-1])
