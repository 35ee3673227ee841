"""Whitespace word-level vocabulary.

Targets in the training files carry meaning in their line structure
(step lines, then the final marker line), so newlines are preserved as
a dedicated token and restored on decode. Everything else splits on
whitespace: each distinct word, number, or equation chunk is one token.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from pathlib import Path
from typing import Iterable

PAD_TOKEN = "<pad>"
EOS_TOKEN = "</s>"
UNK_TOKEN = "<unk>"
NEWLINE_TOKEN = "<nl>"
SPECIALS = (PAD_TOKEN, EOS_TOKEN, UNK_TOKEN)

_NEWLINE_BACK = re.compile(rf" ?{re.escape(NEWLINE_TOKEN)} ?")


def words_of(text: str) -> list[str]:
    return text.replace("\n", f" {NEWLINE_TOKEN} ").split()


def text_of(words: list[str]) -> str:
    return _NEWLINE_BACK.sub("\n", " ".join(words))


class WordVocab:
    def __init__(self, tokens: list[str]):
        if tuple(tokens[:3]) != SPECIALS:
            raise ValueError(f"vocabulary must start with {SPECIALS}")
        self.tokens = list(tokens)
        self.index = {token: i for i, token in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary has duplicate tokens")

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    @property
    def unk_id(self) -> int:
        return 2

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, texts: Iterable[str], max_size: int | None = None) -> "WordVocab":
        """Vocabulary from a corpus: specials, the newline token, then
        words by descending frequency (ties alphabetical, so builds are
        deterministic)."""
        counts: Counter[str] = Counter()
        for text in texts:
            counts.update(words_of(text))
        counts.pop(NEWLINE_TOKEN, None)
        for special in SPECIALS:
            counts.pop(special, None)
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if max_size is not None:
            budget = max_size - len(SPECIALS) - 1
            ordered = ordered[: max(budget, 0)]
        return cls(list(SPECIALS) + [NEWLINE_TOKEN] + [token for token, _ in ordered])

    def encode(self, text: str, add_eos: bool = True) -> list[int]:
        ids = [self.index.get(word, self.unk_id) for word in words_of(text)]
        if add_eos:
            ids.append(self.eos_id)
        return ids

    def decode(self, ids: Iterable[int], stop_at_eos: bool = True) -> str:
        words = []
        for token_id in ids:
            if token_id == self.eos_id and stop_at_eos:
                break
            if token_id == self.pad_id:
                continue
            words.append(self.tokens[token_id])
        return text_of(words)

    def save(self, path: str | Path) -> None:
        payload = {"version": 1, "tokens": self.tokens}
        Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordVocab":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(payload, dict) or "tokens" not in payload:
            raise ValueError(f"{path} is not a vocabulary file")
        return cls(payload["tokens"])
