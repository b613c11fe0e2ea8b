"""Verifiable prescription codes.

A code is 10 random characters from the Crockford base32 alphabet (digits
and uppercase letters minus I, L, O, U) followed by one check character
from the same alphabet, chosen so the mod-32 sum of all 11 character
values is zero. The check character catches every single-character typo
at pharmacist entry; authority always rests with the server lookup.
"""

from __future__ import annotations

import os
import random

CODE_ALPHABET = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"
CODE_BODY_LENGTH = 10
CODE_LENGTH = CODE_BODY_LENGTH + 1

_CHAR_VALUE = {char: value for value, char in enumerate(CODE_ALPHABET)}


def generate_code(rng: random.Random | None = None) -> str:
    """Generate a fresh 11-character prescription code (~50 bits of entropy).

    By default randomness comes from the OS CSPRNG; pass a seeded
    ``random.Random`` for reproducible codes in tests and fixtures. 256 is
    a multiple of 32, so masking a random byte to 5 bits stays uniform.
    """
    if rng is None:
        values = [byte & 31 for byte in os.urandom(CODE_BODY_LENGTH)]
    else:
        values = [rng.getrandbits(5) for _ in range(CODE_BODY_LENGTH)]
    check = (-sum(values)) % 32
    values.append(check)
    return "".join(CODE_ALPHABET[v] for v in values)


def code_checksum_valid(code: object) -> bool:
    """True iff ``code`` is 11 alphabet characters whose values sum to 0 mod 32.

    A syntactic pre-filter only: returns False for anything malformed and
    never raises.
    """
    if not isinstance(code, str) or len(code) != CODE_LENGTH:
        return False
    total = 0
    for char in code:
        value = _CHAR_VALUE.get(char)
        if value is None:
            return False
        total += value
    return total % 32 == 0
