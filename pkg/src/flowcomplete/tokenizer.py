"""Lexer for SFILES 2.0 strings and token <-> integer id mapping.

The token boundaries are defined by a single regular expression (see
``TOKEN_PATTERN``).  ``tokenize`` is a hand-written scanner that reproduces
the behaviour of that pattern, including its lookbehind/lookahead
constraints, by explicit one-character context checks.  The pattern itself
is kept around so tests can cross-check the scanner against a real regex
engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

TOKEN_PATTERN = (
    r"(\(.*?\)|\{.*?\}|\%\([0-9]{3}\)|\%[0-9]{2}|\]|\[|\<.?[0-9]"
    r"|\<\&\||(?<!\<)\&\||n\||(?<!\&)(?<!n)\||\&(?!\|)|\/[0-9]|[0-9])"
)

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")


class TokenKind(Enum):
    UNIT = "unit"                    # (hex)
    TAG = "tag"                      # {tout}, {1}
    RECYCLE_REF = "recycle_ref"      # <1, <%12
    RECYCLE_ANCHOR = "recycle_anchor"  # %12, %(123)
    BRANCH_OPEN = "branch_open"      # [
    BRANCH_CLOSE = "branch_close"    # ]
    CONVERGE_OPEN = "converge_open"  # <&|
    CONVERGE_CLOSE = "converge_close"  # &|
    NEW_TRAIN = "new_train"          # n|
    PIPE = "pipe"                    # |
    AMPERSAND = "ampersand"          # &
    SLASH = "slash"                  # /1
    DIGIT = "digit"                  # 1


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    position: int


class TokenizeError(ValueError):
    pass


class StrayCharacter(TokenizeError):
    def __init__(self, char: str, position: int):
        super().__init__(f"stray character {char!r} at position {position}")
        self.char = char
        self.position = position


def _is_digit(c: str) -> bool:
    return "0" <= c <= "9"


def _match_at(s: str, i: int) -> tuple[str, TokenKind] | None:
    """Longest-alternative match at position i, mirroring TOKEN_PATTERN.

    Alternatives are tried in the pattern's order; the first that matches
    wins (regex alternation semantics).
    """
    c = s[i]
    n = len(s)
    if c == "(":
        j = s.find(")", i + 1)
        if j != -1 and "\n" not in s[i:j]:
            return s[i : j + 1], TokenKind.UNIT
    if c == "{":
        j = s.find("}", i + 1)
        if j != -1 and "\n" not in s[i:j]:
            return s[i : j + 1], TokenKind.TAG
    if c == "%":
        if (
            i + 5 < n
            and s[i + 1] == "("
            and all(_is_digit(s[i + k]) for k in (2, 3, 4))
            and s[i + 5] == ")"
        ):
            return s[i : i + 6], TokenKind.RECYCLE_ANCHOR
        if i + 2 < n and _is_digit(s[i + 1]) and _is_digit(s[i + 2]):
            return s[i : i + 3], TokenKind.RECYCLE_ANCHOR
    if c == "]":
        return "]", TokenKind.BRANCH_CLOSE
    if c == "[":
        return "[", TokenKind.BRANCH_OPEN
    if c == "<":
        # \<.?[0-9] : greedy optional char first, then backtrack
        if i + 2 < n and s[i + 1] != "\n" and _is_digit(s[i + 2]):
            return s[i : i + 3], TokenKind.RECYCLE_REF
        if i + 1 < n and _is_digit(s[i + 1]):
            return s[i : i + 2], TokenKind.RECYCLE_REF
        if i + 2 < n and s[i + 1] == "&" and s[i + 2] == "|":
            return "<&|", TokenKind.CONVERGE_OPEN
    if c == "&" and i + 1 < n and s[i + 1] == "|":
        if i == 0 or s[i - 1] != "<":  # (?<!\<)\&\|
            return "&|", TokenKind.CONVERGE_CLOSE
    if c == "n" and i + 1 < n and s[i + 1] == "|":
        return "n|", TokenKind.NEW_TRAIN
    if c == "|":
        if i == 0 or s[i - 1] not in "&n":  # (?<!\&)(?<!n)\|
            return "|", TokenKind.PIPE
    if c == "&":
        if not (i + 1 < n and s[i + 1] == "|"):  # \&(?!\|)
            return "&", TokenKind.AMPERSAND
    if c == "/" and i + 1 < n and _is_digit(s[i + 1]):
        return s[i : i + 2], TokenKind.SLASH
    if _is_digit(c):
        return c, TokenKind.DIGIT
    return None


def tokenize(s: str, strict: bool = True, warnings: list | None = None) -> list[Token]:
    """Split an SFILES 2.0 string into tokens.

    In strict mode an unmatched character raises StrayCharacter.  In
    lenient mode it is skipped; if ``warnings`` is given, a message is
    appended per skipped character.
    """
    tokens: list[Token] = []
    i = 0
    while i < len(s):
        m = _match_at(s, i)
        if m is None:
            if strict:
                raise StrayCharacter(s[i], i)
            if warnings is not None:
                warnings.append(f"skipped stray character {s[i]!r} at position {i}")
            i += 1
            continue
        text, kind = m
        tokens.append(Token(text, kind, i))
        i += len(text)
    return tokens


def detokenize(tokens: list[Token] | list[str]) -> str:
    return "".join(t.text if isinstance(t, Token) else t for t in tokens)


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token <-> id map with PAD/BOS/EOS/UNK at ids 0-3."""

    id_to_token: tuple[str, ...]
    token_to_id: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def id_of(self, token_text: str) -> int:
        return self.token_to_id.get(token_text, UNK)

    @classmethod
    def from_tokens(cls, tokens_in_id_order: list[str]) -> "Vocabulary":
        if tuple(tokens_in_id_order[:4]) != SPECIAL_TOKENS:
            raise ValueError("first four vocabulary entries must be the special tokens")
        if len(set(tokens_in_id_order)) != len(tokens_in_id_order):
            raise ValueError("duplicate token in vocabulary")
        return cls(
            id_to_token=tuple(tokens_in_id_order),
            token_to_id={t: i for i, t in enumerate(tokens_in_id_order)},
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"tokens": list(self.id_to_token)}, f)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        return cls.from_tokens(data["tokens"])


def build_vocab(corpus: list[str]) -> Vocabulary:
    """Vocabulary over all distinct tokens of the corpus, specials first,
    corpus tokens in lexicographic order."""
    if not corpus:
        raise ValueError("corpus is empty")
    seen: set[str] = set()
    for line in corpus:
        seen.update(t.text for t in tokenize(line))
    return Vocabulary.from_tokens(list(SPECIAL_TOKENS) + sorted(seen))


def encode(
    s: str,
    vocab: Vocabulary,
    add_bos: bool = False,
    add_eos: bool = False,
    strict: bool = True,
) -> list[int]:
    ids = [vocab.id_of(t.text) for t in tokenize(s, strict=strict)]
    if add_bos:
        ids.insert(0, BOS)
    if add_eos:
        ids.append(EOS)
    return ids


def decode(ids: list[int], vocab: Vocabulary) -> str:
    parts = []
    for i in ids:
        if i in (PAD, BOS, EOS):
            continue
        parts.append(vocab.id_to_token[i])
    return "".join(parts)


def read_corpus(path) -> list[str]:
    """Corpus file: one SFILES string per line, UTF-8, LF endings."""
    with open(path, encoding="utf-8") as f:
        return [line for line in f.read().split("\n") if line]


def write_corpus(path, corpus: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in corpus:
            f.write(line + "\n")
