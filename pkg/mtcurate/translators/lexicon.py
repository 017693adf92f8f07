"""
Lexicon backend: token-by-token translation through a bilingual table.

Keys may span several words; the longest key matching at each position wins.
Unknown tokens pass through unchanged, so the output of an already
translated sentence is stable under a second application.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Mapping, Tuple

from ..errors import LexiconError, MissingFileError
from .base import EN_VI, Direction, TranslatorBackend


Phrase = Tuple[str, ...]


def load_lexicon(path: "str | Path") -> Dict[str, str]:
    """Two-column UTF-8 TSV (src \\t dst); '#' lines and blank lines are ignored."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"No such lexicon file: {path}", stage="translate", path=str(path))
    table: Dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
                raise LexiconError(
                    f"Malformed lexicon line {path}:{lineno}: expected 'src<TAB>dst'",
                    path=str(path),
                    line_number=lineno,
                )
            table.setdefault(fields[0].strip(), fields[1].strip())
    return table


class _PhraseTable:
    def __init__(self, mapping: Mapping[str, str]) -> None:
        self.entries: Dict[Phrase, str] = {}
        for src, dst in mapping.items():
            key = tuple(src.split())
            if key:
                self.entries.setdefault(key, dst)
        self.max_len = max((len(k) for k in self.entries), default=0)

    def apply(self, text: str) -> str:
        tokens = text.split()
        out: List[str] = []
        i = 0
        while i < len(tokens):
            for n in range(min(self.max_len, len(tokens) - i), 0, -1):
                hit = self.entries.get(tuple(tokens[i : i + n]))
                if hit is not None:
                    out.append(hit)
                    i += n
                    break
            else:
                out.append(tokens[i])
                i += 1
        return " ".join(out)


class LexiconBackend(TranslatorBackend):
    name = "lexicon"

    def __init__(self, mapping: Mapping[str, str], direction: Direction = EN_VI) -> None:
        super().__init__()
        self.direction = direction
        inverse: Dict[str, str] = {}
        for src, dst in mapping.items():
            inverse.setdefault(dst, src)
        self._tables = {
            direction: _PhraseTable(mapping),
            direction.reverse: _PhraseTable(inverse),
        }

    @classmethod
    def from_file(cls, path: "str | Path", direction: Direction = EN_VI) -> "LexiconBackend":
        return cls(load_lexicon(path), direction)

    def _translate(self, direction: Direction, texts: List[str]) -> List[str]:
        table = self._tables[direction]
        return [table.apply(t) for t in texts]
