"""Exact algebra of differential polynomials and truncated eps-series.

The symbolic workhorse of the package.  A :class:`Monomial` is a product of
derivatives of a single unknown periodic function f(x); a :class:`DiffPoly`
is a finite rational-coefficient combination of monomials; an
:class:`EpsSeries` is a power series in the small parameter eps = 1/N whose
coefficients are differential polynomials, truncated at a fixed order cap.

All coefficients are exact rationals (``fractions.Fraction``): every identity
checked downstream is an exact cancellation, so floating point would be
useless here.  All values are immutable; every operation returns a new value.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial
from typing import Iterable, Mapping, Sequence

Rational = Fraction

__all__ = [
    "Rational",
    "Monomial",
    "DiffPoly",
    "EpsSeries",
    "DerivativeOrderError",
    "ExactDivisionError",
]


class DerivativeOrderError(ValueError):
    """Raised when an operation would create a derivative above the safety cap."""


class ExactDivisionError(ArithmeticError):
    """Raised when dividing an EpsSeries by eps**k whose low coefficients are nonzero."""


def _as_rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


class Monomial:
    """A product f^(k1)^e1 * f^(k2)^e2 * ...  keyed by derivative order.

    Stored as a sorted tuple of (order, exponent) pairs with positive
    exponents; the empty tuple is the constant monomial 1.
    """

    __slots__ = ("_pairs", "_hash")

    def __init__(self, exponents: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        items = exponents.items() if isinstance(exponents, Mapping) else exponents
        pairs = []
        for order, exp in items:
            if order < 0:
                raise ValueError("derivative order must be >= 0")
            if exp < 0:
                raise ValueError("exponents must be >= 0")
            if exp:
                pairs.append((int(order), int(exp)))
        pairs.sort()
        self._pairs = tuple(pairs)
        self._hash = hash(self._pairs)

    @staticmethod
    def one() -> "Monomial":
        return _MONOMIAL_ONE

    @staticmethod
    def f(order: int = 0, exp: int = 1) -> "Monomial":
        """The monomial f^(order) raised to ``exp``."""
        return Monomial([(order, exp)])

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return self._pairs

    def is_one(self) -> bool:
        return not self._pairs

    def degree(self) -> int:
        return sum(e for _, e in self._pairs)

    def weight(self) -> int:
        """Total derivative-order weight sum(k * e_k)."""
        return sum(k * e for k, e in self._pairs)

    def max_order(self) -> int:
        """Highest derivative order present (-1 for the constant monomial)."""
        return self._pairs[-1][0] if self._pairs else -1

    def mul(self, other: "Monomial") -> "Monomial":
        d = dict(self._pairs)
        for k, e in other._pairs:
            d[k] = d.get(k, 0) + e
        return Monomial(d)

    def sort_key(self):
        """Canonical term order: compare (order, exponent) pairs from the
        highest derivative down.  Used descending for display."""
        return tuple(sorted(self._pairs, reverse=True))

    def __eq__(self, other) -> bool:
        return isinstance(other, Monomial) and self._pairs == other._pairs

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Monomial({list(self._pairs)!r})"

    def __str__(self) -> str:
        if not self._pairs:
            return "1"
        out = []
        for order, exp in self._pairs:
            if order == 0:
                name = "f"
            elif order == 1:
                name = "f'"
            elif order == 2:
                name = "f''"
            else:
                name = f"f({order})"
            out.append(name if exp == 1 else f"{name}^{exp}")
        return " * ".join(out)


_MONOMIAL_ONE = Monomial()


class DiffPoly:
    """Differential polynomial: finite map Monomial -> nonzero Fraction."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Monomial, Fraction] | Iterable[tuple[Monomial, Fraction]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        d: dict[Monomial, Fraction] = {}
        for mono, coeff in items:
            c = _as_rational(coeff)
            if c:
                acc = d.get(mono)
                c = c if acc is None else acc + c
                if c:
                    d[mono] = c
                else:
                    del d[mono]
        self._terms = d

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero() -> "DiffPoly":
        return _DIFFPOLY_ZERO

    @staticmethod
    def const(c) -> "DiffPoly":
        return DiffPoly({Monomial.one(): _as_rational(c)})

    @staticmethod
    def f(order: int = 0, exp: int = 1, coeff=1) -> "DiffPoly":
        return DiffPoly({Monomial.f(order, exp): _as_rational(coeff)})

    @staticmethod
    def from_terms(*terms) -> "DiffPoly":
        """Build from (coeff, [(order, exp), ...]) tuples."""
        return DiffPoly([(Monomial(list(pairs)), _as_rational(c)) for c, pairs in terms])

    # -- queries -------------------------------------------------------

    @property
    def terms(self) -> dict[Monomial, Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coeff(self, mono: Monomial) -> Fraction:
        return self._terms.get(mono, Fraction(0))

    def max_order(self) -> int:
        return max((m.max_order() for m in self._terms), default=-1)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, DiffPoly) and self._terms == other._terms

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    # -- ring operations ------------------------------------------------

    def __add__(self, other: "DiffPoly") -> "DiffPoly":
        if not isinstance(other, DiffPoly):
            return NotImplemented
        if not self._terms:
            return other
        if not other._terms:
            return self
        d = dict(self._terms)
        for m, c in other._terms.items():
            acc = d.get(m)
            s = c if acc is None else acc + c
            if s:
                d[m] = s
            else:
                del d[m]
        out = DiffPoly.__new__(DiffPoly)
        out._terms = d
        return out

    def __neg__(self) -> "DiffPoly":
        out = DiffPoly.__new__(DiffPoly)
        out._terms = {m: -c for m, c in self._terms.items()}
        return out

    def __sub__(self, other: "DiffPoly") -> "DiffPoly":
        return self + (-other)

    def __mul__(self, other) -> "DiffPoly":
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, DiffPoly):
            return NotImplemented
        d: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = m1.mul(m2)
                c = c1 * c2
                acc = d.get(m)
                s = c if acc is None else acc + c
                if s:
                    d[m] = s
                elif acc is not None:
                    del d[m]
        out = DiffPoly.__new__(DiffPoly)
        out._terms = d
        return out

    __rmul__ = __mul__

    def scale(self, c) -> "DiffPoly":
        c = _as_rational(c)
        if not c:
            return _DIFFPOLY_ZERO
        out = DiffPoly.__new__(DiffPoly)
        out._terms = {m: c0 * c for m, c0 in self._terms.items()}
        return out

    # -- calculus --------------------------------------------------------

    def x_derive(self) -> "DiffPoly":
        """d/dx as a derivation with d/dx f^(k) = f^(k+1)."""
        d: dict[Monomial, Fraction] = {}
        for mono, coeff in self._terms.items():
            for order, exp in mono.pairs:
                lowered = dict(mono.pairs)
                if exp == 1:
                    del lowered[order]
                else:
                    lowered[order] = exp - 1
                lowered[order + 1] = lowered.get(order + 1, 0) + 1
                m = Monomial(lowered)
                c = coeff * exp
                acc = d.get(m)
                s = c if acc is None else acc + c
                if s:
                    d[m] = s
                elif acc is not None:
                    del d[m]
        out = DiffPoly.__new__(DiffPoly)
        out._terms = d
        return out

    def drop_derivatives(self) -> "DiffPoly":
        """Substitute f' = f'' = ... = 0, keeping the pure-f part."""
        return DiffPoly({m: c for m, c in self._terms.items() if m.max_order() <= 0})

    def evaluate(self, derivs: Sequence) -> float:
        """Substitute numeric values [f, f', f'', ...] and evaluate in floats.

        Entries may be scalars or equal-shaped numpy arrays (pointwise jets).
        """
        total = 0.0
        for mono, coeff in self._terms.items():
            val = float(coeff)
            for order, exp in mono.pairs:
                if order >= len(derivs):
                    raise ValueError(
                        f"need derivative of order {order}, got only {len(derivs)} values"
                    )
                val = val * derivs[order] ** exp
            total = total + val
        return total

    # -- display ---------------------------------------------------------

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self._terms.items(), key=lambda t: t[0].sort_key(), reverse=True)

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for mono, coeff in self.sorted_terms():
            cs = str(coeff) if coeff > 0 else f"({coeff})"
            if mono.is_one():
                parts.append(cs)
            elif coeff == 1:
                parts.append(str(mono))
            else:
                parts.append(f"{cs} * {mono}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"DiffPoly<{self}>"


_DIFFPOLY_ZERO = DiffPoly()


class EpsSeries:
    """Power series in eps truncated at ``order_cap``: sum_k coeffs[k] eps^k.

    Operations on series with different caps silently truncate to the smaller
    cap; within a fixed cap all arithmetic is exact.  The maximum derivative
    order any operation may create is 2 * order_cap; beyond that the engine
    raises instead of silently truncating.
    """

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Sequence[DiffPoly], order_cap: int | None = None):
        coeffs = list(coeffs)
        if order_cap is not None:
            if order_cap < 0:
                raise ValueError("order_cap must be >= 0")
            if len(coeffs) < order_cap + 1:
                coeffs += [_DIFFPOLY_ZERO] * (order_cap + 1 - len(coeffs))
            else:
                coeffs = coeffs[: order_cap + 1]
        if not coeffs:
            raise ValueError("an EpsSeries needs at least the eps^0 coefficient")
        self._coeffs = tuple(coeffs)

    # -- constructors -----------------------------------------------------

    @staticmethod
    def zero(cap: int) -> "EpsSeries":
        return EpsSeries([], order_cap=cap)

    @staticmethod
    def const(c, cap: int) -> "EpsSeries":
        return EpsSeries([DiffPoly.const(c)], order_cap=cap)

    @staticmethod
    def of_poly(p: DiffPoly, cap: int, eps_power: int = 0) -> "EpsSeries":
        coeffs = [_DIFFPOLY_ZERO] * (cap + 1)
        if 0 <= eps_power <= cap:
            coeffs[eps_power] = p
        return EpsSeries(coeffs)

    @staticmethod
    def f(cap: int) -> "EpsSeries":
        """The unknown function f as a series (pure eps^0 term)."""
        return EpsSeries.of_poly(DiffPoly.f(), cap)

    # -- queries ------------------------------------------------------------

    @property
    def order_cap(self) -> int:
        return len(self._coeffs) - 1

    @property
    def coeffs(self) -> tuple[DiffPoly, ...]:
        return self._coeffs

    def coeff(self, k: int) -> DiffPoly:
        return self._coeffs[k]

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self._coeffs)

    def first_nonzero_order(self) -> int | None:
        for k, c in enumerate(self._coeffs):
            if not c.is_zero():
                return k
        return None

    def max_order(self) -> int:
        return max((c.max_order() for c in self._coeffs), default=-1)

    def __eq__(self, other) -> bool:
        return isinstance(other, EpsSeries) and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        return hash(self._coeffs)

    # -- arithmetic -----------------------------------------------------------

    def _common_cap(self, other: "EpsSeries") -> int:
        return min(self.order_cap, other.order_cap)

    def __add__(self, other: "EpsSeries") -> "EpsSeries":
        if not isinstance(other, EpsSeries):
            return NotImplemented
        cap = self._common_cap(other)
        return EpsSeries([self._coeffs[k] + other._coeffs[k] for k in range(cap + 1)])

    def __sub__(self, other: "EpsSeries") -> "EpsSeries":
        if not isinstance(other, EpsSeries):
            return NotImplemented
        cap = self._common_cap(other)
        return EpsSeries([self._coeffs[k] - other._coeffs[k] for k in range(cap + 1)])

    def __neg__(self) -> "EpsSeries":
        return EpsSeries([-c for c in self._coeffs])

    def __mul__(self, other) -> "EpsSeries":
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, EpsSeries):
            return NotImplemented
        cap = self._common_cap(other)
        out = [_DIFFPOLY_ZERO] * (cap + 1)
        for i in range(cap + 1):
            ci = self._coeffs[i]
            if ci.is_zero():
                continue
            for j in range(cap + 1 - i):
                cj = other._coeffs[j]
                if cj.is_zero():
                    continue
                out[i + j] = out[i + j] + ci * cj
        return EpsSeries(out)

    __rmul__ = __mul__

    def scale(self, c) -> "EpsSeries":
        return EpsSeries([p.scale(c) for p in self._coeffs])

    def mul_poly(self, p: DiffPoly) -> "EpsSeries":
        return EpsSeries([c * p for c in self._coeffs])

    def eps_shift(self, k: int) -> "EpsSeries":
        """Multiply by eps^k (k >= 0), truncating at the cap."""
        if k < 0:
            raise ValueError("eps_shift expects k >= 0; use eps_div to lower")
        cap = self.order_cap
        out = [_DIFFPOLY_ZERO] * (cap + 1)
        for i in range(cap + 1 - k):
            out[i + k] = self._coeffs[i]
        return EpsSeries(out)

    def eps_div(self, k: int) -> "EpsSeries":
        """Divide exactly by eps^k.  The dropped low coefficients must vanish.

        The result's cap drops by k: higher coefficients are simply unknown.
        """
        if k == 0:
            return self
        if k < 0 or k > self.order_cap:
            raise ValueError("bad eps power")
        for j in range(k):
            if not self._coeffs[j].is_zero():
                raise ExactDivisionError(
                    f"eps^{j} coefficient is nonzero: {self._coeffs[j]}"
                )
        return EpsSeries(self._coeffs[k:])

    def truncate(self, cap: int) -> "EpsSeries":
        if cap >= self.order_cap:
            return self
        return EpsSeries(self._coeffs[: cap + 1])

    # -- calculus ---------------------------------------------------------------

    def _check_order(self, poly: DiffPoly) -> DiffPoly:
        limit = 2 * self.order_cap
        if poly.max_order() > limit:
            raise DerivativeOrderError(
                f"derivative order {poly.max_order()} exceeds safety cap {limit}"
            )
        return poly

    def x_derive(self) -> "EpsSeries":
        return EpsSeries([self._check_order(c.x_derive()) for c in self._coeffs])

    def shift(self, n: int) -> "EpsSeries":
        """Taylor shift: the series evaluated at x + n*eps.

        Returns sum_{i=0..cap} (n eps)^i / i! * (d/dx)^i of self, truncated.
        """
        cap = self.order_cap
        acc = list(self._coeffs)
        deriv = self
        for i in range(1, cap + 1):
            deriv = deriv.x_derive()
            w = Fraction(n**i, factorial(i))
            if not w:
                break
            for j in range(cap + 1 - i):
                c = deriv._coeffs[j]
                if not c.is_zero():
                    acc[i + j] = acc[i + j] + c.scale(w)
        return EpsSeries(acc)

    def dt_along(self, h: "EpsSeries") -> "EpsSeries":
        """Time derivative induced by df/dt = h.

        Acts as a derivation with dt(f^(k)) = (d/dx)^k h and dt(eps) = 0; in
        particular dt commutes with d/dx.
        """
        cap = min(self.order_cap, h.order_cap)
        h = h.truncate(cap)
        h_derivs: list[EpsSeries] = [h]

        def h_deriv(k: int) -> EpsSeries:
            while len(h_derivs) <= k:
                h_derivs.append(h_derivs[-1].x_derive())
            return h_derivs[k]

        out = EpsSeries.zero(cap)
        for k in range(cap + 1):
            poly = self._coeffs[k]
            if poly.is_zero():
                continue
            part = EpsSeries.zero(cap)
            for mono, coeff in poly.terms.items():
                for order, exp in mono.pairs:
                    rest = dict(mono.pairs)
                    if exp == 1:
                        del rest[order]
                    else:
                        rest[order] = exp - 1
                    factor = DiffPoly({Monomial(rest): coeff * exp})
                    part = part + h_deriv(order).mul_poly(factor)
            out = out + part.eps_shift(k)
        return out

    def drop_derivatives(self) -> "EpsSeries":
        return EpsSeries([c.drop_derivatives() for c in self._coeffs])

    def evaluate(self, derivs: Sequence, eps: float) -> float:
        """Numeric value of the truncated series at a given jet and eps.

        Like DiffPoly.evaluate, jet entries may be scalars or arrays.
        """
        total = 0.0
        for k, c in enumerate(self._coeffs):
            if not c.is_zero():
                total = total + c.evaluate(derivs) * eps**k
        return total

    # -- display ----------------------------------------------------------------

    def render(self) -> str:
        return "\n".join(f"eps^{k} : {c}" for k, c in enumerate(self._coeffs))

    def __str__(self) -> str:
        return self.render()

    def __repr__(self) -> str:
        nz = self.first_nonzero_order()
        return f"EpsSeries(cap={self.order_cap}, first_nonzero={nz})"
