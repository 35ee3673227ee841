"""Exact arithmetic engine for calculator-style equation steps.

The grammar is the minimal one covering grade-school calculator
annotations: binary ``+ - * /`` with the usual precedence, parentheses,
unary minus, and plain decimal numbers. Everything evaluates to
arbitrary-precision rationals (``fractions.Fraction``), so verifying a
step like ``48/2=24`` is never subject to floating-point rounding.

Grammar, left-associative::

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := "-" factor | primary
    primary := NUMBER | "(" expr ")"

Percent signs, currency symbols, and thousands commas are accepted in
bare numbers via :func:`normalize_number`; inside expressions they are
rejected unless ``lenient_numbers`` is set, because annotation bodies
are expected to be plain arithmetic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import DivisionByZeroError, ExpressionSyntaxError, NumberFormatError

# The package-wide exact rational type. fractions.Fraction already keeps
# values in lowest terms with a positive denominator.
Rational = Fraction

CURRENCY_SYMBOLS = "$€£¥₩"

_NUMBER_BODY = re.compile(r"\d+\.?\d*|\.\d+")
_THOUSANDS_COMMA = re.compile(r"(?<=\d),(?=\d)")
_STRICT_NUMBER_TOKEN = re.compile(r"\d+\.?\d*|\.\d+")
_LENIENT_NUMBER_TOKEN = re.compile(
    r"[$€£¥₩]?(?:\d[\d,]*(?:\.\d*)?|\.\d+)%?"
)


def normalize_number(text: str) -> Fraction:
    """Parse a human-written number into an exact rational.

    Accepts an optional sign and a single leading currency symbol (in
    either order), thousands commas between digits, leading-dot decimals
    like ``.5``, and a trailing ``%`` which divides the value by 100.
    Decimal digits convert exactly; there is no floating point on the
    path.
    """
    s = text.strip()
    sign = ""
    saw_currency = False
    i = 0
    while i < len(s):
        ch = s[i]
        if ch in "+-" and not sign:
            sign = ch
        elif ch in CURRENCY_SYMBOLS and not saw_currency:
            saw_currency = True
        else:
            break
        i += 1
    body = s[i:]
    percent = body.endswith("%")
    if percent:
        body = body[:-1]
    body = _THOUSANDS_COMMA.sub("", body)
    if not body or not _NUMBER_BODY.fullmatch(body):
        raise NumberFormatError(text, "no numeric value")
    if body.endswith("."):
        body = body[:-1]
    value = Fraction(body)
    if percent:
        value /= 100
    if sign == "-":
        value = -value
    return value


# --------------------------------------------------------------------------
# Expression trees
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Number:
    value: Fraction


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Paren:
    inner: "Expr"


Expr = Union[Number, Neg, Binary, Paren]


@dataclass(frozen=True)
class _Token:
    kind: str  # number | op | lparen | rparen | end
    text: str
    pos: int


def _tokenize(text: str, lenient_numbers: bool) -> list[_Token]:
    number_token = _LENIENT_NUMBER_TOKEN if lenient_numbers else _STRICT_NUMBER_TOKEN
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("lparen", ch, i))
            i += 1
            continue
        if ch == ")":
            tokens.append(_Token("rparen", ch, i))
            i += 1
            continue
        if ch in "+-*/":
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        m = number_token.match(text, i)
        if m:
            tokens.append(_Token("number", m.group(), i))
            i = m.end()
            continue
        raise ExpressionSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._i = 0

    def _peek(self) -> _Token:
        return self._tokens[self._i]

    def _take(self) -> _Token:
        token = self._tokens[self._i]
        self._i += 1
        return token

    def expr(self) -> Expr:
        node = self.term()
        while self._peek().kind == "op" and self._peek().text in "+-":
            op = self._take().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self._peek().kind == "op" and self._peek().text in "*/":
            op = self._take().text
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        token = self._peek()
        if token.kind == "op" and token.text == "-":
            self._take()
            return Neg(self.factor())
        return self.primary()

    def primary(self) -> Expr:
        token = self._take()
        if token.kind == "number":
            try:
                return Number(normalize_number(token.text))
            except NumberFormatError as exc:
                raise ExpressionSyntaxError(str(exc), token.pos) from exc
        if token.kind == "lparen":
            node = self.expr()
            closing = self._take()
            if closing.kind != "rparen":
                raise ExpressionSyntaxError("expected ')'", closing.pos)
            return Paren(node)
        if token.kind == "end":
            raise ExpressionSyntaxError("unexpected end of input", token.pos)
        raise ExpressionSyntaxError(f"unexpected {token.text!r}", token.pos)


def parse_expression(text: str, lenient_numbers: bool = False) -> Expr:
    """Parse arithmetic text into an expression tree.

    ``lenient_numbers`` additionally accepts currency symbols, thousands
    commas, and trailing percent signs inside number tokens, for text
    that came out of a model rather than a curated corpus.
    """
    parser = _Parser(_tokenize(text, lenient_numbers))
    node = parser.expr()
    trailing = parser._peek()
    if trailing.kind != "end":
        raise ExpressionSyntaxError(f"trailing input {trailing.text!r}", trailing.pos)
    return node


def evaluate(expr: Expr) -> Fraction:
    """Exactly evaluate an expression tree. Never touches floats."""
    if isinstance(expr, Number):
        return expr.value
    if isinstance(expr, Neg):
        return -evaluate(expr.operand)
    if isinstance(expr, Paren):
        return evaluate(expr.inner)
    if isinstance(expr, Binary):
        left = evaluate(expr.left)
        right = evaluate(expr.right)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "/":
            if right == 0:
                raise DivisionByZeroError(render_expression(expr))
            return left / right
    raise TypeError(f"not an expression node: {expr!r}")


# --------------------------------------------------------------------------
# Canonical rendering
# --------------------------------------------------------------------------


def render_rational(value: Fraction) -> str:
    """Render a rational exactly: decimal when the expansion terminates.

    Denominators whose only prime factors are 2 and 5 have a finite
    decimal expansion and render as ``2.5``; anything else renders as
    ``p/q``.
    """
    den = value.denominator
    if den == 1:
        return str(value.numerator)
    twos = fives = 0
    d = den
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{value.numerator}/{den}"
    digits = max(twos, fives)
    scaled = abs(value.numerator) * 10**digits // den
    whole, frac = divmod(scaled, 10**digits)
    sign = "-" if value.numerator < 0 else ""
    frac_text = str(frac).rjust(digits, "0").rstrip("0")
    return f"{sign}{whole}.{frac_text}"


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def _effective_precedence(expr: Expr) -> int:
    if isinstance(expr, Binary):
        return _PRECEDENCE[expr.op]
    if isinstance(expr, Paren):
        return _effective_precedence(expr.inner)
    return 3  # numbers and unary minus bind tightest


def render_expression(expr: Expr) -> str:
    """Render compactly with minimal parentheses, e.g. ``48/2``.

    Source-level ``Paren`` nodes are dropped; parentheses reappear only
    where precedence demands them. Reparsing the result yields a tree
    with the same exact value.
    """
    if isinstance(expr, Number):
        return render_rational(expr.value)
    if isinstance(expr, Paren):
        return render_expression(expr.inner)
    if isinstance(expr, Neg):
        inner = render_expression(expr.operand)
        if isinstance(expr.operand, Binary) or (
            isinstance(expr.operand, Paren)
            and _effective_precedence(expr.operand) < 3
        ):
            return f"-({inner})"
        return f"-{inner}"
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        left = render_expression(expr.left)
        if _effective_precedence(expr.left) < prec:
            left = f"({left})"
        right = render_expression(expr.right)
        right_prec = _effective_precedence(expr.right)
        if right_prec < prec or (right_prec == prec and expr.op in "-/"):
            right = f"({right})"
        return f"{left}{expr.op}{right}"
    raise TypeError(f"not an expression node: {expr!r}")


# --------------------------------------------------------------------------
# Step verification
# --------------------------------------------------------------------------

VERDICT_EXACT = "exact-match"
VERDICT_TOLERANCE = "tolerance-match"
VERDICT_MISMATCH = "mismatch"
VERDICT_EVAL_ERROR = "eval-error"


@dataclass(frozen=True)
class StepCheck:
    """Outcome of verifying one ``expr=claimed`` step."""

    expr_text: str
    claimed_text: str
    step_index: int
    expr: Expr | None
    computed: Fraction | None
    claimed: Fraction | None
    verdict: str
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict in (VERDICT_EXACT, VERDICT_TOLERANCE)


def within_tolerance(a: Fraction, b: Fraction, tolerance: Fraction) -> bool:
    """Relative comparison: |a - b| <= tolerance * max(1, |b|), exact at 0."""
    return abs(a - b) <= tolerance * max(Fraction(1), abs(b))


def check_step(
    expr_text: str,
    claimed_text: str,
    tolerance: Fraction = Fraction(0),
    step_index: int = 0,
    lenient_numbers: bool = False,
) -> StepCheck:
    """Verify one arithmetic step. Failures are verdicts, never raises."""
    try:
        expr = parse_expression(expr_text, lenient_numbers=lenient_numbers)
        computed = evaluate(expr)
    except (ExpressionSyntaxError, DivisionByZeroError, NumberFormatError) as exc:
        return StepCheck(
            expr_text, claimed_text, step_index, None, None, None,
            VERDICT_EVAL_ERROR, str(exc),
        )
    try:
        claimed = normalize_number(claimed_text)
    except NumberFormatError as exc:
        return StepCheck(
            expr_text, claimed_text, step_index, expr, computed, None,
            VERDICT_EVAL_ERROR, f"claimed value unparseable: {exc}",
        )
    if computed == claimed:
        verdict, detail = VERDICT_EXACT, ""
    elif within_tolerance(computed, claimed, tolerance):
        verdict, detail = VERDICT_TOLERANCE, ""
    else:
        verdict = VERDICT_MISMATCH
        detail = f"computed {render_rational(computed)}, claimed {render_rational(claimed)}"
    return StepCheck(expr_text, claimed_text, step_index, expr, computed, claimed, verdict, detail)


def check_annotation(annotation, tolerance: Fraction = Fraction(0), lenient_numbers: bool = False) -> StepCheck:
    """Verify a parsed calculator annotation (anything with ``expr_text``,
    ``claimed_text``, and ``step_index`` attributes)."""
    return check_step(
        annotation.expr_text,
        annotation.claimed_text,
        tolerance=tolerance,
        step_index=annotation.step_index,
        lenient_numbers=lenient_numbers,
    )
