"""Model selection predicates over scalar model parameters.

Grammar (``|`` binds looser than ``&``)::

    expr := conj ("|" conj)*
    conj := atom ("&" atom)*
    atom := "(" expr ")" | NAME OP VALUE
    OP   := == | != | < | <= | > | >=

``||``/``&&`` and the words ``or``/``and`` are accepted as synonyms.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from typing import Callable, Union

_OPS = {
    "==": operator.eq, "!=": operator.ne, "<": operator.lt,
    "<=": operator.le, ">": operator.gt, ">=": operator.ge,
}
_TOKEN = re.compile(
    r"\s*(?:(?P<op>==|!=|<=|>=|<|>)|(?P<bool>\|\||&&|\||&|\bor\b|\band\b)|(?P<paren>[()])"
    r"|(?P<str>'[^']*'|\"[^\"]*\")|(?P<num>-?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*))"
)


@dataclass(frozen=True)
class Comparison:
    param: str
    op: str
    value: Union[float, str]

    def __call__(self, params: dict) -> bool:
        if self.param not in params:
            return False
        return bool(_OPS[self.op](params[self.param], self.value))


@dataclass(frozen=True)
class AllOf:
    terms: tuple

    def __call__(self, params: dict) -> bool:
        return all(t(params) for t in self.terms)


@dataclass(frozen=True)
class AnyOf:
    terms: tuple

    def __call__(self, params: dict) -> bool:
        return any(t(params) for t in self.terms)


Predicate = Callable[[dict], bool]


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse predicate {text!r} at position {pos}")
        kind = m.lastgroup
        tok = m.group(kind)
        if kind == "bool":
            tok = "|" if tok in ("|", "||", "or") else "&"
        tokens.append((kind, tok))
        pos = m.end()
    return tokens


def parse_predicate(text: str) -> Predicate:
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, None)

    def take(kind=None, value=None):
        nonlocal pos
        k, v = peek()
        if k is None or (kind and k != kind) or (value and v != value):
            raise ValueError(f"unexpected token {v!r} in predicate {text!r}")
        pos += 1
        return v

    def expr():
        terms = [conj()]
        while peek() == ("bool", "|"):
            take()
            terms.append(conj())
        return terms[0] if len(terms) == 1 else AnyOf(tuple(terms))

    def conj():
        terms = [atom()]
        while peek() == ("bool", "&"):
            take()
            terms.append(atom())
        return terms[0] if len(terms) == 1 else AllOf(tuple(terms))

    def atom():
        if peek() == ("paren", "("):
            take()
            inner = expr()
            take("paren", ")")
            return inner
        name = take("name")
        op = take("op")
        kind, raw = peek()
        take()
        if kind == "num":
            value = float(raw)
        elif kind == "str":
            value = raw[1:-1]
        elif kind == "name":
            value = raw
        else:
            raise ValueError(f"expected a value after {name} {op} in {text!r}")
        return Comparison(name, op, value)

    result = expr()
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in predicate {text!r}")
    return result


def as_predicate(pred) -> Predicate | None:
    if pred is None or pred == "":
        return None
    if isinstance(pred, str):
        return parse_predicate(pred)
    if callable(pred):
        return pred
    raise TypeError(f"expected a predicate string or callable, got {type(pred).__name__}")
