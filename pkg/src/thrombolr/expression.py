"""Reference parser and evaluator for emitted model expressions.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom (('^' | '**') unary)?        # right-associative
    atom    := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Identifiers are ``[A-Za-z_][A-Za-z0-9_.]*``. The only functions are the
dialect's exponential and natural-log names. Evaluation works on scalars
or on numpy arrays bound to variables, so one parse can score many rows.
"""

import re
from dataclasses import dataclass

import numpy as np

from .errors import (ExpressionDomainError, ExpressionSyntaxError,
                     UnboundVariableError)

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op>\*\*|[-+*/^()])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


# AST nodes are plain tuples: ("num", v) ("var", name) ("neg", x)
# ("bin", op, a, b) ("call", fn, x) with fn in {"exp", "ln"}.

class _Parser:
    def __init__(self, text, functions):
        self.tokens = tokenize(text)
        self.i = 0
        self.functions = functions

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.tok
        if tok.text != text:
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExpressionSyntaxError(f"expected {text!r}, found {found}", tok.pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return node

    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        if self.tok.text == "-":
            self.advance()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.text in ("^", "**"):
            self.advance()
            return ("bin", "^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return ("num", float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if self.tok.text == "(":
                if tok.text not in self.functions:
                    raise ExpressionSyntaxError(f"unknown function {tok.text!r}", tok.pos)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return ("call", self.functions[tok.text], arg)
            return ("var", tok.text)
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExpressionSyntaxError(f"unexpected {found}", tok.pos)


def parse_expression(text, dialect=None):
    """Parse ``text`` into a tuple AST using the dialect's function names."""
    from .export import ExpressionDialect

    dialect = dialect or ExpressionDialect()
    functions = {dialect.exp_name: "exp", dialect.ln_name: "ln"}
    return _Parser(text, functions).parse()


def _exp(x):
    with np.errstate(over="ignore"):
        return np.exp(x)


def _ln(x):
    if np.any(~(np.asarray(x) > 0)):
        raise ExpressionDomainError("ln of a nonpositive argument")
    return np.log(x)


def _div(a, b):
    if np.any(np.asarray(b) == 0):
        raise ExpressionDomainError("division by zero")
    with np.errstate(over="ignore"):
        return np.divide(a, b)


def _pow(a, b):
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.power(a, b)
    if np.any(np.isnan(out) & ~np.isnan(np.asarray(a) + np.asarray(b))):
        raise ExpressionDomainError("power of a negative base with a fractional exponent")
    return out


_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": _div, "^": _pow}
_CALL = {"exp": _exp, "ln": _ln}


def _eval(node, bindings):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        try:
            return bindings[node[1]]
        except KeyError:
            raise UnboundVariableError(f"unbound variable {node[1]!r}") from None
    if kind == "neg":
        return np.negative(_eval(node[1], bindings))
    if kind == "call":
        return _CALL[node[1]](_eval(node[2], bindings))
    with np.errstate(over="ignore"):
        return _BINARY[node[1]](_eval(node[2], bindings), _eval(node[3], bindings))


def evaluate_expression(text, bindings, dialect=None):
    """Evaluate ``text`` with variables taken from ``bindings``.

    Parameters
    ----------
    text : str or tuple
        Expression source, or an AST from :func:`parse_expression`.
    bindings : mapping
        Variable token to float or 1-D array; arrays broadcast elementwise.
    dialect : ExpressionDialect, optional
        Supplies the exp/ln function names. Defaults to ``exp``/``ln``.

    Returns
    -------
    float or ndarray of float64

    Raises
    ------
    ExpressionSyntaxError
        Malformed text; the message carries the character position.
    UnboundVariableError
        A variable missing from ``bindings``.
    ExpressionDomainError
        ``ln`` of a nonpositive value or division by zero.
    """
    ast = parse_expression(text, dialect) if isinstance(text, str) else text
    bound = {k: (np.asarray(v, dtype=np.float64) if not isinstance(v, (int, float)) else float(v))
             for k, v in bindings.items()}
    out = _eval(ast, bound)
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=np.float64)
