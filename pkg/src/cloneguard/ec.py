"""Short-Weierstrass group arithmetic over the NIST P-256 curve.

The public interface works on affine points (``Point``) plus a ``None``
sentinel for the point at infinity.  Internally the hot paths (scalar
multiplication, multi-scalar multiplication) run in Jacobian coordinates
and only convert back to affine at the end, which keeps the modular
inversions down to one per public call.

WARNING: none of this code is constant time.  Scalar multiplication,
field inversion and the window tables all branch and index on secret
data.  That is fine for a protocol simulator — which is what this
package is — and disqualifying for anything that handles keys an
adversary can time.  Do not lift this module into production use.
"""

from __future__ import annotations

from dataclasses import dataclass

# === P-256 domain parameters (SEC2 "secp256r1") ===

P = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF
A = P - 3
B = 0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B
N = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
GX = 0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296
GY = 0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5
H = 1

_WINDOW = 4  # window width (bits) for all windowed multiplication


class InvalidPointError(ValueError):
    """Raised when a coordinate pair is not on the curve."""


@dataclass(frozen=True)
class Point:
    """Affine curve point with canonically reduced coordinates."""

    x: int
    y: int

    def __post_init__(self) -> None:
        if not (0 <= self.x < P and 0 <= self.y < P):
            raise InvalidPointError("coordinates must be reduced mod p")


# The point at infinity is represented as None throughout.
INFINITY = None

G = Point(GX, GY)


@dataclass(frozen=True)
class DomainParams:
    """Curve domain parameters, as handed to the security checks.

    The group operations themselves are compiled against the module-level
    P-256 constants; this record exists so that deliberately broken
    parameter sets can be fed to ``validate_curve_security``.
    """

    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int
    h: int


P256 = DomainParams(p=P, a=A, b=B, gx=GX, gy=GY, n=N, h=H)


def is_on_curve(point: Point | None) -> bool:
    """True if ``point`` satisfies y^2 = x^3 + ax + b (infinity counts)."""
    if point is None:
        return True
    x, y = point.x, point.y
    return (y * y - (x * x * x + A * x + B)) % P == 0


def _require_on_curve(point: Point | None) -> None:
    if not is_on_curve(point):
        raise InvalidPointError(f"point is not on the curve: {point}")


def point_neg(point: Point | None) -> Point | None:
    if point is None:
        return None
    return Point(point.x, (-point.y) % P)


def point_add(p1: Point | None, p2: Point | None) -> Point | None:
    """Affine group law (chord/tangent).  Inputs are validated.

    This is the plain reference path; the windowed multipliers below use
    Jacobian internals instead and are checked against it in the tests.
    """
    _require_on_curve(p1)
    _require_on_curve(p2)
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    if p1.x == p2.x and (p1.y + p2.y) % P == 0:
        return None
    if p1 == p2:
        lam = (3 * p1.x * p1.x + A) * pow(2 * p1.y, -1, P) % P
    else:
        lam = (p2.y - p1.y) * pow(p2.x - p1.x, -1, P) % P
    x3 = (lam * lam - p1.x - p2.x) % P
    y3 = (lam * (p1.x - x3) - p1.y) % P
    return Point(x3, y3)


# === Jacobian internals ===
# A Jacobian triple (X, Y, Z) stands for the affine point (X/Z^2, Y/Z^3);
# None again plays the point at infinity.


def _jdbl(pt):
    # dbl-2001-b, specialised to a = -3.
    if pt is None:
        return None
    x1, y1, z1 = pt
    delta = z1 * z1 % P
    gamma = y1 * y1 % P
    beta = x1 * gamma % P
    alpha = 3 * (x1 - delta) * (x1 + delta) % P
    x3 = (alpha * alpha - 8 * beta) % P
    z3 = ((y1 + z1) * (y1 + z1) - gamma - delta) % P
    y3 = (alpha * (4 * beta - x3) - 8 * gamma * gamma) % P
    if z3 == 0:
        return None
    return x3, y3, z3


def _jadd(p1, p2):
    # add-2007-bl with explicit doubling/cancellation handling.
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    x1, y1, z1 = p1
    x2, y2, z2 = p2
    z1z1 = z1 * z1 % P
    z2z2 = z2 * z2 % P
    u1 = x1 * z2z2 % P
    u2 = x2 * z1z1 % P
    s1 = y1 * z2 * z2z2 % P
    s2 = y2 * z1 * z1z1 % P
    h = (u2 - u1) % P
    r = (s2 - s1) % P
    if h == 0:
        if r == 0:
            return _jdbl(p1)
        return None
    hh = h * h % P
    hhh = h * hh % P
    v = u1 * hh % P
    x3 = (r * r - hhh - 2 * v) % P
    y3 = (r * (v - x3) - s1 * hhh) % P
    z3 = z1 * z2 % P * h % P
    if z3 == 0:
        return None
    return x3, y3, z3


def _jadd_affine(p1, ax, ay):
    # Mixed addition: p1 Jacobian, (ax, ay) affine (Z2 = 1).
    if p1 is None:
        return ax, ay, 1
    x1, y1, z1 = p1
    z1z1 = z1 * z1 % P
    u2 = ax * z1z1 % P
    s2 = ay * z1 * z1z1 % P
    h = (u2 - x1) % P
    r = (s2 - y1) % P
    if h == 0:
        if r == 0:
            return _jdbl(p1)
        return None
    hh = h * h % P
    hhh = h * hh % P
    v = x1 * hh % P
    x3 = (r * r - hhh - 2 * v) % P
    y3 = (r * (v - x3) - y1 * hhh) % P
    z3 = z1 * h % P
    if z3 == 0:
        return None
    return x3, y3, z3


def _to_affine(pt) -> Point | None:
    if pt is None:
        return None
    x, y, z = pt
    zi = pow(z, -1, P)
    zi2 = zi * zi % P
    return Point(x * zi2 % P, y * zi2 % P * zi % P)


# === Fixed-base table for the generator ===
# _GEN_TABLE[w][d-1] holds (d << 4w) * G in affine form, so a fixed-base
# multiplication is at most 64 mixed additions and no doublings.  Built
# lazily with the affine reference addition, which keeps the table
# independent of the Jacobian code it accelerates.

_GEN_TABLE: list[list[Point]] | None = None


def _gen_table() -> list[list[Point]]:
    global _GEN_TABLE
    if _GEN_TABLE is None:
        table = []
        base: Point | None = G
        for _ in range(256 // _WINDOW):
            row = [base]
            for _ in range(2 ** _WINDOW - 2):
                row.append(point_add(row[-1], base))
            table.append(row)  # type: ignore[arg-type]
            base = point_add(row[-1], base)
        _GEN_TABLE = table
    return _GEN_TABLE


def _fixed_base_mul(k: int):
    table = _gen_table()
    acc = None
    w = 0
    while k:
        d = k & 15
        if d:
            pt = table[w][d - 1]
            acc = _jadd_affine(acc, pt.x, pt.y)
        k >>= 4
        w += 1
    return acc


def scalar_mul(k: int, point: Point | None) -> Point | None:
    """Compute k * point.  Requires k >= 0; k is reduced mod n.

    Reducing the scalar is exact for every valid public input: the group
    order is the prime n with cofactor 1, so all finite curve points have
    order n.
    """
    if k < 0:
        raise ValueError("scalar must be non-negative")
    _require_on_curve(point)
    if point is None:
        return None
    k %= N
    if k == 0:
        return None
    if point == G:
        return _to_affine(_fixed_base_mul(k))
    # Generic 4-bit window over Jacobian coordinates.
    table = [(point.x, point.y, 1)]
    for _ in range(2 ** _WINDOW - 2):
        table.append(_jadd_affine(table[-1], point.x, point.y))
    acc = None
    for w in range((k.bit_length() + _WINDOW - 1) // _WINDOW - 1, -1, -1):
        if acc is not None:
            acc = _jdbl(acc)
            acc = _jdbl(acc)
            acc = _jdbl(acc)
            acc = _jdbl(acc)
        d = (k >> (_WINDOW * w)) & 15
        if d:
            acc = _jadd(acc, table[d - 1])
    return _to_affine(acc)


def multi_scalar_mul(pairs) -> Point | None:
    """Compute sum(k_i * P_i) with one shared double-and-add pass.

    Straus interleaving: every point gets a 4-bit window table, the
    accumulator is doubled once per window position for the whole batch.
    Produces exactly the value of folding ``scalar_mul``/``point_add``
    (all arithmetic here is exact), just with far fewer doublings.
    An empty input yields the point at infinity.
    """
    terms = []
    for k, point in pairs:
        if k < 0:
            raise ValueError("scalar must be non-negative")
        _require_on_curve(point)
        if point is None:
            continue
        k %= N
        if k:
            terms.append((k, point))
    if not terms:
        return None
    tables = []
    for _, point in terms:
        tbl = [(point.x, point.y, 1)]
        for _ in range(2 ** _WINDOW - 2):
            tbl.append(_jadd_affine(tbl[-1], point.x, point.y))
        tables.append(tbl)
    top = max(k.bit_length() for k, _ in terms)
    acc = None
    for w in range((top + _WINDOW - 1) // _WINDOW - 1, -1, -1):
        if acc is not None:
            acc = _jdbl(acc)
            acc = _jdbl(acc)
            acc = _jdbl(acc)
            acc = _jdbl(acc)
        shift = _WINDOW * w
        for (k, _), tbl in zip(terms, tables):
            d = (k >> shift) & 15
            if d:
                acc = _jadd(acc, tbl[d - 1])
    return _to_affine(acc)


# === Validation ===


def validate_public_key(q: Point | None, *, check_order: bool = True) -> bool:
    """Check that q is a usable public key.

    Rejects the point at infinity and off-curve coordinates, then checks
    n * q == infinity.  With cofactor 1 the group order is the prime n,
    so every finite on-curve point already has order n and the scalar
    multiplication can be skipped by passing ``check_order=False`` —
    callers in batch paths use that shortcut, which rejects exactly the
    same set of inputs.
    """
    if q is None:
        return False
    if not is_on_curve(q):
        return False
    if check_order and scalar_mul(N, q) is not None:
        return False
    return True


@dataclass(frozen=True)
class SecurityCheck:
    """Outcome of one curve-level sanity check."""

    name: str
    passed: bool
    detail: str


def _is_probable_prime(m: int) -> bool:
    # Miller-Rabin over a fixed base set; plenty for a sanity check on
    # published 256-bit group orders.
    if m < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43)
    for q in small:
        if m % q == 0:
            return m == q
    d = m - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for base in small:
        x = pow(base, d, m)
        if x in (1, m - 1):
            continue
        for _ in range(r - 1):
            x = x * x % m
            if x == m - 1:
                break
        else:
            return False
    return True


def validate_curve_security(params: DomainParams, embedding_bound: int = 100) -> list[SecurityCheck]:
    """Run the standard structural checks against a parameter set.

    Checks: the curve is not anomalous (n != p), the embedding degree is
    above ``embedding_bound`` (p^k mod n != 1 for 1 <= k <= bound), the
    cofactor is 1, and the group order is probably prime.
    """
    checks = []

    checks.append(SecurityCheck(
        name="not_anomalous",
        passed=params.n != params.p,
        detail="group order must differ from the field characteristic",
    ))

    failing_k = 0
    for k in range(1, embedding_bound + 1):
        if pow(params.p, k, params.n) == 1:
            failing_k = k
            break
    checks.append(SecurityCheck(
        name="embedding_degree",
        passed=failing_k == 0,
        detail=(f"p^{failing_k} = 1 mod n" if failing_k
                else f"p^k != 1 mod n for k <= {embedding_bound}"),
    ))

    checks.append(SecurityCheck(
        name="cofactor_one",
        passed=params.h == 1,
        detail=f"cofactor is {params.h}",
    ))

    checks.append(SecurityCheck(
        name="prime_order",
        passed=_is_probable_prime(params.n),
        detail="group order passes Miller-Rabin",
    ))

    return checks
