"""Exact frequency-lattice arithmetic.

Frequencies are rational combinations of declared generators
(1, sqrt2, sqrt3, ... or user algebraic numbers), so resonance questions
reduce to integer linear algebra. The single lattice primitive is a row
Hermite normal form with explicit unimodular tracking.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import mpmath
import numpy as np

from .errors import ConfigError, GeneratorDeclarationError, NumericalError, PrimitivityError, ResonanceViolation

WORK_DPS = 50


# generators -------------------------------------------------------------------------

@dataclass(frozen=True)
class Generator:
    """A real number used as a basis element for exact frequency arithmetic."""

    name: str
    minpoly: tuple = ()
    approx: float | None = None

    def value(self, dps=WORK_DPS):
        with mpmath.workdps(dps + 10):
            if self.name in _BUILTIN:
                return +_BUILTIN[self.name]()
            if not self.minpoly:
                raise ConfigError(f"generator {self.name!r} needs a minimal polynomial")
            coeffs = [mpmath.mpf(c) for c in self.minpoly]
            return mpmath.findroot(lambda x: mpmath.polyval(coeffs, x), mpmath.mpf(self.approx))

    def __float__(self):
        return float(self.value(20))


_BUILTIN = {
    "1": lambda: mpmath.mpf(1),
    "sqrt2": lambda: mpmath.sqrt(2),
    "sqrt3": lambda: mpmath.sqrt(3),
    "sqrt5": lambda: mpmath.sqrt(5),
    "sqrt6": lambda: mpmath.sqrt(6),
    "sqrt7": lambda: mpmath.sqrt(7),
    "golden": lambda: (1 + mpmath.sqrt(5)) / 2,
    "cbrt2": lambda: mpmath.cbrt(2),
}


def make_generator(spec):
    if isinstance(spec, Generator):
        return spec
    if isinstance(spec, str):
        name = "golden" if spec == "phi" else spec
        if name not in _BUILTIN:
            raise ConfigError(f"unknown generator {spec!r}; declare it with a minimal polynomial")
        return Generator(name)
    if isinstance(spec, dict):
        return Generator(spec["name"], tuple(spec["minpoly"]), float(spec["approx"]))
    raise ConfigError(f"cannot interpret generator {spec!r}")


def check_generators(generators, maxcoeff=10**4):
    """Reject generator lists with a small integer relation (found by PSLQ)."""
    if len(generators) < 2:
        return
    names = [g.name for g in generators]
    if len(set(names)) != len(names):
        raise GeneratorDeclarationError(f"duplicate generators in {names}")
    with mpmath.workdps(80):
        vals = [g.value(80) for g in generators]
        rel = mpmath.pslq(vals, maxcoeff=maxcoeff, maxsteps=10**5)
    if rel is not None:
        raise GeneratorDeclarationError(f"generators {names} satisfy the integer relation {rel}")


_TERM = re.compile(r"^(?P<num>\d+(?:\.\d+)?(?:/\d+)?)?\*?(?P<gen>[A-Za-z_]\w*)?(?:/(?P<den>\d+))?$")


def parse_combination(text):
    """Parse e.g. ``"1/2"``, ``"3*sqrt2"`` or ``"1+sqrt2/2"`` into {generator: Fraction}."""
    text = str(text).replace(" ", "")
    if not text:
        raise ConfigError("empty frequency expression")
    out = {}
    for sign, body in re.findall(r"([+-]?)([^+-]+)", text):
        m = _TERM.match(body)
        if not m or not (m.group("num") or m.group("gen")):
            raise ConfigError(f"cannot parse frequency term {body!r}")
        coef = Fraction(m.group("num")) if m.group("num") else Fraction(1)
        if m.group("den"):
            coef /= int(m.group("den"))
        if sign == "-":
            coef = -coef
        gen = m.group("gen") or "1"
        gen = "golden" if gen == "phi" else gen
        out[gen] = out.get(gen, Fraction(0)) + coef
    return out


def _to_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def parse_frequency_vector(spec):
    """Return (generators, coefficient rows) from a config frequency block.

    Accepts ``{"generators": [...], "coeffs": [[...], ...]}`` or a list whose
    items are numbers or expressions such as ``"sqrt2"``.
    """
    if isinstance(spec, dict):
        gens = [make_generator(g) for g in spec["generators"]]
        rows = [[_to_fraction(c) for c in row] for row in spec["coeffs"]]
        if any(len(row) != len(gens) for row in rows):
            raise ConfigError("each coefficient row needs one entry per generator")
        return gens, rows
    items = [spec] if isinstance(spec, (str, int, float)) else list(spec)
    parsed = [parse_combination(x) if isinstance(x, str) else {"1": _to_fraction(x)} for x in items]
    names = []
    for p in parsed:
        for g in p:
            if g not in names:
                names.append(g)
    names.sort(key=lambda g: (g != "1", g))
    gens = [make_generator(g) for g in names]
    rows = [[p.get(g, Fraction(0)) for g in names] for p in parsed]
    return gens, rows


def merge_generators(gens_a, rows_a, gens_b, rows_b):
    """Express two coefficient systems over a shared generator list."""
    names = [g.name for g in gens_a]
    gens = list(gens_a)
    for g in gens_b:
        if g.name not in names:
            names.append(g.name)
            gens.append(g)

    def widen(gs, rows):
        pos = [names.index(g.name) for g in gs]
        out = []
        for row in rows:
            new = [Fraction(0)] * len(names)
            for p, c in zip(pos, row):
                new[p] += c
            out.append(new)
        return out

    return gens, widen(gens_a, rows_a), widen(gens_b, rows_b)


# integer linear algebra ------------------------------------------------------------

def _ext_gcd(a, b):
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def hermite_normal_form(A):
    """Row Hermite normal form of an integer matrix.

    Returns ``(H, U)`` with ``U @ A == H``, U unimodular, H in row echelon
    form with positive pivots and entries above each pivot reduced into
    ``[0, pivot)``. Zero rows come last.
    """
    H = [list(map(int, row)) for row in A]
    m = len(H)
    n = len(H[0]) if m else 0
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    row = 0
    for col in range(n):
        if row >= m:
            break
        for i in range(row + 1, m):
            a, b = H[row][col], H[i][col]
            if b == 0:
                continue
            g, x, y = _ext_gcd(a, b)
            p, q = a // g, b // g
            # [[x, y], [-q, p]] has determinant 1
            H[row], H[i] = ([x * u + y * v for u, v in zip(H[row], H[i])],
                            [-q * u + p * v for u, v in zip(H[row], H[i])])
            U[row], U[i] = ([x * u + y * v for u, v in zip(U[row], U[i])],
                            [-q * u + p * v for u, v in zip(U[row], U[i])])
        piv = H[row][col]
        if piv == 0:
            continue
        if piv < 0:
            H[row] = [-v for v in H[row]]
            U[row] = [-v for v in U[row]]
            piv = -piv
        for i in range(row):
            f = H[i][col] // piv
            if f:
                H[i] = [u - f * v for u, v in zip(H[i], H[row])]
                U[i] = [u - f * v for u, v in zip(U[i], U[row])]
        row += 1
    return H, U


def integer_determinant(M):
    """Exact determinant by fraction-free (Bareiss) elimination."""
    A = [list(map(int, r)) for r in M]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if A[i][k] != 0), None)
            if swap is None:
                return 0
            A[k], A[swap] = A[swap], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def rational_inverse(M):
    """Exact inverse of a square matrix over the rationals (Gauss-Jordan)."""
    n = len(M)
    A = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            raise NumericalError("matrix is singular")
        A[c], A[p] = A[p], A[c]
        inv = 1 / A[c][c]
        A[c] = [v * inv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [u - f * v for u, v in zip(A[r], A[c])]
    return [row[n:] for row in A]


def rational_rank(rows):
    A = [[Fraction(x) for x in row] for row in rows]
    rank, ncols = 0, len(A[0]) if A else 0
    for c in range(ncols):
        p = next((r for r in range(rank, len(A)) if A[r][c] != 0), None)
        if p is None:
            continue
        A[rank], A[p] = A[p], A[rank]
        for r in range(len(A)):
            if r != rank and A[r][c] != 0:
                f = A[r][c] / A[rank][c]
                A[r] = [u - f * v for u, v in zip(A[r], A[rank])]
        rank += 1
    return rank


def _integerize_rows(rows):
    out = []
    for row in rows:
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (Fraction(x).denominator for x in row), 1)
        out.append([int(Fraction(x) * den) for x in row])
    return out


def invariant_factors(E):
    """Nonzero invariant factors of an integer matrix (Smith normal form diagonal)."""
    from sympy import Matrix, ZZ
    from sympy.matrices.normalforms import smith_normal_form

    S = smith_normal_form(Matrix(E), domain=ZZ)
    return [abs(int(S[i, i])) for i in range(min(S.shape)) if S[i, i] != 0]


def resonance_lattice(C, generators=None):
    """Integer basis of {k in Z^d : nu . k = 0} for nu_i = sum_j C_ij g_j.

    With rationally independent generators, nu . k = 0 exactly when
    C^T k = 0, so the module is the integer kernel of C^T. The returned rows
    are in Hermite normal form.
    """
    d = len(C)
    if d == 0:
        return []
    G = len(C[0])
    # scaling rows of C^T (columns of C) by positive integers does not change the kernel
    cols = _integerize_rows([[Fraction(C[i][j]) for i in range(d)] for j in range(G)])
    aug = [[cols[j][i] for j in range(G)] + [int(i == r) for r in range(d)] for i in range(d)]
    H, _ = hermite_normal_form(aug)
    kernel = [row[G:] for row in H if not any(row[:G])]
    if not kernel:
        return []
    Hk, _ = hermite_normal_form(kernel)
    return [row for row in Hk if any(row)]


def complete_basis(E, d):
    """Complete lattice rows ``E`` (r x d) to a unimodular integer matrix M.

    The first r rows of M are the rows of E. Raises PrimitivityError, naming
    the offending invariant factors, when E does not span a saturated
    sublattice of Z^d.
    """
    E = [list(map(int, e)) for e in E]
    r = len(E)
    if r == 0:
        return [[int(i == j) for j in range(d)] for i in range(d)]
    if any(len(e) != d for e in E):
        raise ConfigError("lattice rows have the wrong length")
    Et = [[E[i][j] for i in range(r)] for j in range(d)]  # d x r
    H, U = hermite_normal_form(Et)  # U Et = H = [T; 0]
    T = [row[:r] for row in H[:r]]
    det = integer_determinant(T)
    if abs(det) != 1:
        factors = invariant_factors(E)
        bad = [f for f in factors if f != 1]
        raise PrimitivityError(f"rows do not extend to a basis of Z^{d}: invariant factors {bad}", bad)
    # E V = [T^T 0] with V = U^T, so E = [T^T 0] V^-1; complete with the last rows of V^-1
    Uinv = rational_inverse(U)
    Vinv = [[Uinv[j][i] for j in range(d)] for i in range(d)]
    M = E + [[int(x) for x in Vinv[i]] for i in range(r, d)]
    if abs(integer_determinant(M)) != 1:
        raise NumericalError("basis completion failed to be unimodular")
    return M


# frequency systems ---------------------------------------------------------------

def _rows_value(rows, gens, dps=WORK_DPS):
    vals = [g.value(dps) for g in gens]
    with mpmath.workdps(dps):
        return [mpmath.fsum(Fraction(c).numerator * v / Fraction(c).denominator for c, v in zip(row, vals))
                for row in rows]


@dataclass
class DiophantineRecord:
    gamma_hat: float
    kappa: float
    K_max: int
    offender: tuple
    value: float
    variant: str = "non.res3"

    def as_dict(self):
        return {"gamma_hat": self.gamma_hat, "kappa": self.kappa, "K_max": self.K_max,
                "offender": [list(map(int, part)) for part in self.offender],
                "value": self.value, "variant": self.variant}


@dataclass
class FrequencySystem:
    """Frequencies nu (and optionally a drive omega) with their lattice data.

    Attributes
    ----------
    generators : list of Generator
    nu_coeffs : list of list of Fraction
        ``nu_i = sum_j nu_coeffs[i][j] * g_j``.
    lattice : list of list of int
        Hermite-reduced basis of the resonance module of nu.
    M : list of list of int
        Unimodular completion whose first r rows are ``lattice``.
    nu_tilde_coeffs : list of list of Fraction
        Rationally independent reduced frequencies in generator form.
    v : list of list of int
        Integer vectors with ``nu = sum_j nu_tilde_j v_j``.
    omega_coeffs : list of list of Fraction or None
    """

    generators: list
    nu_coeffs: list
    lattice: list
    M: list
    Minv: list
    nu_tilde_coeffs: list
    v: list
    omega_coeffs: list | None = None
    diophantine: DiophantineRecord | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def d(self):
        return len(self.nu_coeffs)

    @property
    def d_tilde(self):
        return len(self.nu_tilde_coeffs)

    @property
    def r(self):
        return len(self.lattice)

    @property
    def n(self):
        return 0 if self.omega_coeffs is None else len(self.omega_coeffs)

    @property
    def nu(self):
        return np.array([float(x) for x in _rows_value(self.nu_coeffs, self.generators)])

    @property
    def nu_tilde(self):
        return np.array([float(x) for x in _rows_value(self.nu_tilde_coeffs, self.generators)])

    @property
    def omega(self):
        if self.omega_coeffs is None:
            return None
        return np.array([float(x) for x in _rows_value(self.omega_coeffs, self.generators)])

    def ktilde(self, model):
        """Integer K-tilde lattice tuples (v_j . (k - lambda)) at each basis index."""
        if model.k_lattice is None:
            raise ConfigError("model has no lattice joint spectrum")
        if model.k_lattice.shape[1] != self.d:
            raise ConfigError(f"model has {model.k_lattice.shape[1]} modes, frequency system has {self.d}")
        return model.k_lattice @ np.array(self.v, dtype=np.int64).T

    def combination_coeffs(self, k, ell):
        """Generator coefficients of omega . k + nu_tilde . ell (exact)."""
        G = len(self.generators)
        out = [Fraction(0)] * G
        rows = list(zip(k, self.omega_coeffs or [])) + list(zip(ell, self.nu_tilde_coeffs))
        for c, row in rows:
            if c:
                for j in range(G):
                    out[j] += c * row[j]
        return out

    def is_exact_zero(self, k, ell):
        return not any(self.combination_coeffs(k, ell))

    def reconstruction_holds(self):
        """Check nu == sum_j nu_tilde_j v_j exactly in generator form."""
        G = len(self.generators)
        for i in range(self.d):
            total = [sum((self.v[j][i] * self.nu_tilde_coeffs[j][g] for j in range(self.d_tilde)), Fraction(0))
                     for g in range(G)]
            if total != [Fraction(x) for x in self.nu_coeffs[i]]:
                return False
        return True

    def independence_certified(self):
        """nu_tilde has no nonzero integer relation (exact rank test)."""
        return self.d_tilde == 0 or rational_rank(self.nu_tilde_coeffs) == self.d_tilde

    def as_dict(self):
        return {
            "generators": [g.name for g in self.generators],
            "nu": self.nu.tolist(),
            "lattice": self.lattice,
            "M": self.M,
            "d_tilde": self.d_tilde,
            "nu_tilde": self.nu_tilde.tolist(),
            "v": self.v,
            "omega": None if self.omega is None else self.omega.tolist(),
            "diophantine": None if self.diophantine is None else self.diophantine.as_dict(),
        }


def decompose_frequency(generators, nu_coeffs, omega_coeffs=None, check=True):
    """Build a FrequencySystem: resonance lattice, completion, nu_tilde and v_j."""
    gens = [make_generator(g) for g in generators]
    if check:
        check_generators(gens)
    nu_coeffs = [[Fraction(c) for c in row] for row in nu_coeffs]
    d = len(nu_coeffs)
    lattice = resonance_lattice(nu_coeffs, gens)
    r = len(lattice)
    M = complete_basis(lattice, d)
    G = len(gens)
    nu_check = [[sum((M[i][j] * nu_coeffs[j][g] for j in range(d)), Fraction(0)) for g in range(G)]
                for i in range(d)]
    if any(any(row) for row in nu_check[:r]):
        raise GeneratorDeclarationError("resonant directions do not annihilate nu; generators are not independent")
    Minv = [[int(x) for x in row] for row in rational_inverse(M)]
    nu_tilde = nu_check[r:]
    v = [[Minv[i][r + j] for i in range(d)] for j in range(d - r)]
    # orient each reduced frequency positively
    vals = _rows_value(nu_tilde, gens) if nu_tilde else []
    for j, val in enumerate(vals):
        if val < 0:
            nu_tilde[j] = [-c for c in nu_tilde[j]]
            v[j] = [-c for c in v[j]]
            M[r + j] = [-c for c in M[r + j]]
            for i in range(d):
                Minv[i][r + j] = -Minv[i][r + j]
    omega = None if omega_coeffs is None else [[Fraction(c) for c in row] for row in omega_coeffs]
    return FrequencySystem(generators=gens, nu_coeffs=nu_coeffs, lattice=lattice, M=M, Minv=Minv,
                           nu_tilde_coeffs=nu_tilde, v=v, omega_coeffs=omega)


def frequency_system(nu_spec, omega_spec=None, check=True):
    """FrequencySystem from config-style specs (see :func:`parse_frequency_vector`)."""
    gens, nu_rows = parse_frequency_vector(nu_spec)
    omega_rows = None
    if omega_spec is not None:
        g2, om_rows = parse_frequency_vector(omega_spec)
        gens, nu_rows, omega_rows = merge_generators(gens, nu_rows, g2, om_rows)
    return decompose_frequency(gens, nu_rows, omega_rows, check=check)


# Diophantine scans ----------------------------------------------------------------

def _l1_ball(D, K):
    """Integer vectors with 1 <= |x|_1 <= K, one of each +/- pair."""
    out = []
    for x in itertools.product(range(-K, K + 1), repeat=D):
        s = sum(abs(c) for c in x)
        if 1 <= s <= K:
            first = next(c for c in x if c)
            if first > 0:
                out.append(x)
    return np.array(out, dtype=np.int64).reshape(-1, D)


def diophantine_scan(freq, kappa, K_max, variant="non.res3", shortlist=64):
    """Estimate the Diophantine constant of (omega, nu_tilde).

    For ``variant="non.res3"`` minimizes |omega.k + nu_tilde.l| (|k|+|l|)^kappa
    over 0 != (k, l) with |k|_1 + |l|_1 <= K_max. For ``variant="non.res.re"``
    minimizes |omega.k + m| (1 + |k|^kappa) over 0 != k, m in Z, using the
    nearest integer m for each k.

    The minimum is located in double precision and the shortlisted candidates
    are re-evaluated with 50-digit arithmetic; the offender's value is then
    bracketed with interval arithmetic. An exact zero raises ResonanceViolation.
    """
    if kappa <= 0:
        raise ConfigError("kappa must be positive")
    if K_max < 1:
        raise ConfigError("K_max must be >= 1")
    if freq.omega_coeffs is None:
        raise ConfigError("frequency system has no drive frequency omega")
    n = freq.n
    if variant == "non.res3":
        rows = [list(r) for r in freq.omega_coeffs] + [list(r) for r in freq.nu_tilde_coeffs]
    elif variant == "non.res.re":
        rows = [list(r) for r in freq.omega_coeffs]
    else:
        raise ConfigError(f"unknown Diophantine variant {variant!r}")
    D = len(rows)
    vecs = _l1_ball(D, int(K_max))
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (Fraction(c).denominator for r in rows for c in r), 1)
    int_rows = np.array([[int(Fraction(c) * den) for c in r] for r in rows], dtype=object)
    gen_vals = [g.value() for g in freq.generators]
    float_rows = np.array([[float(Fraction(c)) for c in r] for r in rows])
    gvals = np.array([float(v) for v in gen_vals])
    x = vecs @ (float_rows @ gvals)
    norms = np.abs(vecs).sum(axis=1).astype(float)

    if variant == "non.res3":
        coef = vecs.astype(object) @ int_rows  # exact generator coefficients, scaled
        zero = np.array([not any(c) for c in coef])
        if zero.any():
            v0 = vecs[np.flatnonzero(zero)[0]]
            raise ResonanceViolation(
                f"exact resonance omega.k + nu_tilde.l = 0 at k={v0[:n].tolist()}, l={v0[n:].tolist()}")
        weighted = np.abs(x) * norms**kappa
    else:
        m = -np.round(x)
        x = x + m
        # omega.k + m == 0 exactly iff the coefficients vanish with m absorbed by the generator "1"
        weighted = np.abs(x) * (1.0 + norms**kappa)

    cand = np.argsort(weighted, kind="stable")[:shortlist]
    best, best_idx, best_val = None, None, None
    with mpmath.workdps(WORK_DPS):
        mp_rows = [mpmath.fsum(Fraction(c).numerator * gv / Fraction(c).denominator for c, gv in zip(r, gen_vals))
                   for r in rows]
        for i in cand:
            vec = vecs[i]
            val = mpmath.fsum(int(c) * w for c, w in zip(vec, mp_rows))
            if variant == "non.res.re":
                val = val + int(m[i])
                if val == 0 or _exact_zero_re(freq, vec, int(m[i])):
                    raise ResonanceViolation(f"exact resonance omega.k + m = 0 at k={vec.tolist()}, m={int(m[i])}")
                w_val = abs(val) * (1 + mpmath.mpf(norms[i]) ** kappa)
            else:
                w_val = abs(val) * mpmath.mpf(norms[i]) ** kappa
            if best is None or w_val < best:
                best, best_idx, best_val = w_val, i, val
    _certify_nonzero(rows, freq.generators, vecs[best_idx], int(m[best_idx]) if variant == "non.res.re" else 0)
    vec = vecs[best_idx]
    if variant == "non.res3":
        offender = (tuple(int(c) for c in vec[:n]), tuple(int(c) for c in vec[n:]))
    else:
        offender = (tuple(int(c) for c in vec), (int(m[best_idx]),))
    record = DiophantineRecord(gamma_hat=float(best), kappa=float(kappa), K_max=int(K_max),
                               offender=offender, value=float(best_val), variant=variant)
    freq.diophantine = record
    return record


def _exact_zero_re(freq, k, m):
    G = len(freq.generators)
    coeffs = [sum((int(k[i]) * Fraction(freq.omega_coeffs[i][g]) for i in range(len(k))), Fraction(0))
              for g in range(G)]
    names = [g.name for g in freq.generators]
    if "1" in names:
        coeffs[names.index("1")] += m
    elif m:
        return False
    return not any(coeffs)


def _certify_nonzero(rows, gens, vec, m):
    """Interval evaluation of the offender; fails if the precision cannot separate it from zero."""
    iv = mpmath.iv
    old = iv.dps
    iv.dps = WORK_DPS
    try:
        total = iv.mpf(m)
        for c, row in zip(vec, rows):
            for coef, g in zip(row, gens):
                if coef and c:
                    gv = g.value(WORK_DPS)
                    lo, hi = gv - mpmath.mpf(10) ** (-WORK_DPS), gv + mpmath.mpf(10) ** (-WORK_DPS)
                    total += int(c) * iv.mpf([lo, hi]) * iv.mpf(Fraction(coef).numerator) / Fraction(coef).denominator
        if total.a <= 0 <= total.b:
            raise NumericalError("interval evaluation cannot separate the worst divisor from zero; raise precision")
    finally:
        iv.dps = old
