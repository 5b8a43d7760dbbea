"""Tokenizer and reader for s-expressions with source positions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


class SExprError(ValueError):
    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        where = f" at offset {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class Atom:
    text: str
    pos: int
    quoted: bool = False

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class SList:
    items: tuple["SExpr", ...]
    pos: int

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def head(self) -> str | None:
        if self.items and isinstance(self.items[0], Atom):
            return self.items[0].text
        return None


SExpr = Union[Atom, SList]


def tokenize(text: str) -> list[tuple[str, int, bool]]:
    tokens: list[tuple[str, int, bool]] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append((c, i, False))
            i += 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SExprError("unterminated quoted symbol", i)
            tokens.append((text[i + 1 : j], i, True))
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n and not (text[j] == '"' and (j + 1 >= n or text[j + 1] != '"')):
                j += 2 if text[j] == '"' else 1
            if j >= n:
                raise SExprError("unterminated string literal", i)
            tokens.append((text[i : j + 1], i, False))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();|":
                j += 1
            tokens.append((text[i:j], i, False))
            i = j
    return tokens


def read_all(text: str) -> list[SExpr]:
    """Read every top-level s-expression in ``text``."""
    tokens = tokenize(text)
    stack: list[tuple[int, list[SExpr]]] = []
    out: list[SExpr] = []
    for tok, pos, quoted in tokens:
        if tok == "(" and not quoted:
            stack.append((pos, []))
        elif tok == ")" and not quoted:
            if not stack:
                raise SExprError("unbalanced ')'", pos)
            start, items = stack.pop()
            node = SList(tuple(items), start)
            (stack[-1][1] if stack else out).append(node)
        else:
            atom = Atom(tok, pos, quoted)
            (stack[-1][1] if stack else out).append(atom)
    if stack:
        raise SExprError("unbalanced '('", stack[-1][0])
    return out


def read_one(text: str) -> SExpr:
    items = read_all(text)
    if len(items) != 1:
        raise SExprError(f"expected exactly one s-expression, found {len(items)}", 0)
    return items[0]
