"""Reserved marker strings and language identifiers shared by every module."""

import enum

BOS = "<s>"
EOS = "</s>"
SW = "<sw>"
UNK = "<unk>"

RESERVED = frozenset((BOS, EOS, SW, UNK))
MARKERS = frozenset((BOS, EOS, SW))


class Lang(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"

    @property
    def other(self) -> "Lang":
        return Lang.L2 if self is Lang.L1 else Lang.L1

    @classmethod
    def parse(cls, value) -> "Lang":
        if isinstance(value, Lang):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown language id {value!r} (expected L1 or L2)") from None

    def __str__(self) -> str:
        return self.value
