"""Tokenizer shared by the dataset, the models and the text metrics."""
from __future__ import absolute_import, division, print_function

import re

from typing import List

_PUNCTUATION = re.compile(r"[^\w\s]", flags=re.UNICODE)


def tokenize(text: str) -> List[str]:
    """Lowercase, strip punctuation and split on whitespace.

    >>> tokenize("Because the man's shirt is RED!")
    ['because', 'the', 'mans', 'shirt', 'is', 'red']
    """
    return _PUNCTUATION.sub("", text.lower()).split()


def normalize_answer(answer: str) -> str:
    """Canonical answer label: the tokens joined by single spaces.

    >>> normalize_answer("  Tennis Racket. ")
    'tennis racket'
    """
    return " ".join(tokenize(answer))


__all__ = ["tokenize", "normalize_answer"]
