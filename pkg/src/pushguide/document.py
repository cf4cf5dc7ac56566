"""Tokenizer for the flat ``key = value [unit]`` configuration format."""

from dataclasses import dataclass

from .errors import ConfigError
from .units import UNITS


@dataclass(frozen=True)
class Entry:
    key: str
    value: str
    unit: str | None
    line: int | None

    def number(self):
        try:
            return float(self.value)
        except ValueError:
            raise ConfigError(f"{self.key}: expected a number, got {self.value!r}", self.line) from None


class ConfigDocument:
    """Ordered key -> Entry mapping; later assignments override earlier ones."""

    def __init__(self, entries=()):
        self._entries = {}
        for e in entries:
            self._entries[e.key] = e

    def __contains__(self, key):
        return key in self._entries

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self):
        return len(self._entries)

    def get(self, key):
        return self._entries.get(key)

    def keys(self):
        return list(self._entries)

    def set(self, entry):
        self._entries[entry.key] = entry

    def with_prefix(self, prefix):
        return [e for e in self if e.key.startswith(prefix)]


def split_value(text):
    """Split ``"5.9 MHz"`` into ``("5.9", "MHz")``; a trailing token is a unit only if known."""
    tokens = text.split()
    if len(tokens) >= 2 and tokens[-1] in UNITS:
        return " ".join(tokens[:-1]), tokens[-1]
    if len(tokens) >= 2 and tokens[-1].startswith("[") and tokens[-1].endswith("]"):
        return " ".join(tokens[:-1]), tokens[-1][1:-1]
    return text.strip(), None


def parse_line(raw, lineno=None):
    line = raw.split("#", 1)[0].strip()
    if not line:
        return None
    if "=" not in line:
        raise ConfigError(f"expected 'key = value [unit]', got {raw.strip()!r}", lineno)
    key, _, rest = line.partition("=")
    key = key.strip()
    if not key:
        raise ConfigError("empty key", lineno)
    value, unit = split_value(rest.strip())
    if value == "":
        raise ConfigError(f"{key}: missing value", lineno)
    return Entry(key, value, unit, lineno)


def parse_document(text):
    doc = ConfigDocument()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        entry = parse_line(raw, lineno)
        if entry is not None:
            doc.set(entry)
    return doc
