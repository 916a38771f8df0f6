"""Tokenizer for the ``.scr`` and ``.scn`` formats."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List

from .diagnostics import ParseError, SourceSpan, error

IDENT = "IDENT"
INT = "INT"
EVENT = "EVENT"
OP = "OP"
EOF = "EOF"

_UNICODE_OPS = {"≤": "<=", "≥": ">=", "≠": "!="}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<event>@[TFC](?![A-Za-z0-9_]))
  | (?P<int>-?[0-9]+(?![A-Za-z_]))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>-->|--|->|\.\.|<=|>=|!=|[=<>(){}\[\];:,*≤≥≠])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan

    def is_op(self, text: str) -> bool:
        return self.kind == OP and self.text == text

    def is_word(self, text: str) -> bool:
        return self.kind == IDENT and self.text == text


def tokenize(text: str, filename: str = "<input>") -> List[Token]:
    tokens: List[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(filename, line, col, line, col + 1)
            raise ParseError([error("lex", f"unexpected character {text[pos]!r}", span)])
        kind = m.lastgroup
        lexeme = m.group()
        end_col = col + len(lexeme)
        span = SourceSpan(filename, line, col, line, end_col)
        if kind == "nl":
            line, col = line + 1, 1
            pos = m.end()
            continue
        if kind == "event":
            tokens.append(Token(EVENT, lexeme, span))
        elif kind == "int":
            tokens.append(Token(INT, lexeme, span))
        elif kind == "ident":
            tokens.append(Token(IDENT, lexeme, span))
        elif kind == "op":
            tokens.append(Token(OP, _UNICODE_OPS.get(lexeme, lexeme), span))
        pos = m.end()
        col = end_col
    tokens.append(Token(EOF, "", SourceSpan(filename, line, col, line, col)))
    return tokens
