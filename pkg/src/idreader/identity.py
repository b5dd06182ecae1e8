"""Dummy personal data: names, dates, fiscal codes, document numbers, MRZ.

All strings stay within the recognizer charset (A-Z, 0-9, space, '.', '-',
'/', '<'). Date generation is anchored to a fixed reference date so that
seeded runs are reproducible on any day.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .classifier import DocumentClass
from .errors import EmptyList, InvalidName

REFERENCE_DATE = date(2020, 1, 1)

_DATA_DIR = Path(__file__).parent / "data" / "lists"

_VOWELS = set("AEIOU")

_MONTH_LETTERS = "ABCDEHLMPRST"

_ODD_VALUES = {
    "0": 1, "1": 0, "2": 5, "3": 7, "4": 9, "5": 13, "6": 15, "7": 17,
    "8": 19, "9": 21, "A": 1, "B": 0, "C": 5, "D": 7, "E": 9, "F": 13,
    "G": 15, "H": 17, "I": 19, "J": 21, "K": 2, "L": 4, "M": 18, "N": 20,
    "O": 11, "P": 3, "Q": 6, "R": 8, "S": 12, "T": 14, "U": 16, "V": 10,
    "W": 22, "X": 25, "Y": 24, "Z": 23,
}


def _even_value(ch: str) -> int:
    return int(ch) if ch.isdigit() else ord(ch) - ord("A")


@dataclass
class NameLists:
    surnames: list[str]
    male_names: list[str]
    female_names: list[str]
    places: list[tuple[str, str]]  # (name, cadastral code)
    streets: list[str]


def _read_lines(path: Path) -> list[str]:
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
    return [ln for ln in lines if ln]


def load_name_lists(data_dir=None) -> NameLists:
    d = Path(data_dir) if data_dir else _DATA_DIR
    places = []
    for ln in _read_lines(d / "places.txt"):
        name, _, code = ln.partition(";")
        places.append((name.strip(), code.strip()))
    lists = NameLists(
        surnames=_read_lines(d / "surnames.txt"),
        male_names=_read_lines(d / "names_m.txt"),
        female_names=_read_lines(d / "names_f.txt"),
        places=places,
        streets=_read_lines(d / "streets.txt"),
    )
    for attr in ("surnames", "male_names", "female_names", "places", "streets"):
        if not getattr(lists, attr):
            raise EmptyList(f"list {attr} is empty")
    return lists


@dataclass
class PersonRecord:
    surname: str
    name: str
    sex: str  # "M" or "F"
    birthdate: date
    release_date: date
    expiry_date: date
    birthplace: str
    cadastral_code: str
    address: str
    fiscal_code: str
    document_number: str


# document kind per class: number format and validity period
_KIND = {
    DocumentClass.PAPER_ID_FRONT: "paper_id",
    DocumentClass.PAPER_ID_BACK: "paper_id",
    DocumentClass.ELECTRONIC_ID_FRONT: "electronic_id",
    DocumentClass.ELECTRONIC_ID_BACK: "electronic_id",
    DocumentClass.DRIVING_LICENSE_FRONT: "driving_license",
    DocumentClass.DRIVING_LICENSE_BACK: "driving_license",
    DocumentClass.HEALTH_CARD_FRONT: "health_card",
    DocumentClass.HEALTH_CARD_BACK: "health_card",
    DocumentClass.PASSPORT: "passport",
}

_VALIDITY_YEARS = {
    "paper_id": 10,
    "electronic_id": 10,
    "driving_license": 10,
    "health_card": 6,
    "passport": 10,
}


def _letters(rng, n):
    return "".join(chr(ord("A") + int(c)) for c in rng.integers(0, 26, size=n))


def _digits(rng, n):
    return "".join(str(int(c)) for c in rng.integers(0, 10, size=n))


def document_number(kind: str, rng) -> str:
    if kind == "paper_id":
        return _letters(rng, 2) + _digits(rng, 7)
    if kind == "electronic_id":
        return "C" + _letters(rng, 1) + _digits(rng, 5) + _letters(rng, 2)
    if kind == "driving_license":
        return _letters(rng, 2) + _digits(rng, 7) + _letters(rng, 1)
    if kind == "health_card":
        return "80380" + _digits(rng, 15)
    if kind == "passport":
        return _letters(rng, 2) + _digits(rng, 7)
    raise ValueError(f"unknown document kind {kind}")


def gen_person(rng, lists: NameLists, doc_class: DocumentClass) -> PersonRecord:
    """Random person with document dates/number for the given class."""
    sex = "M" if rng.random() < 0.5 else "F"
    names = lists.male_names if sex == "M" else lists.female_names
    surname = lists.surnames[int(rng.integers(0, len(lists.surnames)))]
    name = names[int(rng.integers(0, len(names)))]
    place, code = lists.places[int(rng.integers(0, len(lists.places)))]
    street = lists.streets[int(rng.integers(0, len(lists.streets)))]
    # house numbers avoid the digit 0 (visually ambiguous with O outside
    # the mono typeface used for the numeric fields)
    tens, units = int(rng.integers(0, 10)), int(rng.integers(1, 10))
    address = f"{street} {tens if tens else ''}{units}"
    birth = REFERENCE_DATE - timedelta(days=int(rng.integers(18 * 365, 90 * 365)))
    release = REFERENCE_DATE - timedelta(days=int(rng.integers(0, 10 * 365)))
    kind = _KIND[DocumentClass(doc_class)]
    expiry = release + timedelta(days=_VALIDITY_YEARS[kind] * 365)
    person = PersonRecord(
        surname=surname,
        name=name,
        sex=sex,
        birthdate=birth,
        release_date=release,
        expiry_date=expiry,
        birthplace=place,
        cadastral_code=code,
        address=address,
        fiscal_code="",
        document_number=document_number(kind, rng),
    )
    person.fiscal_code = fiscal_code(person)
    return person


# ---------------------------------------------------------------------------
# Fiscal code


def _name_letters(s: str) -> list[str]:
    letters = [c for c in s.upper() if "A" <= c <= "Z"]
    if not letters:
        raise InvalidName(f"no usable letters in {s!r}")
    return letters


def _surname_part(surname: str) -> str:
    letters = _name_letters(surname)
    cons = [c for c in letters if c not in _VOWELS]
    vows = [c for c in letters if c in _VOWELS]
    return "".join((cons + vows)[:3]).ljust(3, "X")


def _given_name_part(name: str) -> str:
    letters = _name_letters(name)
    cons = [c for c in letters if c not in _VOWELS]
    vows = [c for c in letters if c in _VOWELS]
    if len(cons) >= 4:
        picked = [cons[0], cons[2], cons[3]]
    else:
        picked = (cons + vows)[:3]
    return "".join(picked).ljust(3, "X")


def fiscal_check_char(partial: str) -> str:
    total = 0
    for i, ch in enumerate(partial):
        # positions are 1-based in the published tables
        if (i + 1) % 2 == 1:
            total += _ODD_VALUES[ch]
        else:
            total += _even_value(ch)
    return chr(ord("A") + total % 26)


def fiscal_code(person: PersonRecord) -> str:
    """16-character code from name, birth data, and cadastral place code."""
    part = _surname_part(person.surname) + _given_name_part(person.name)
    part += f"{person.birthdate.year % 100:02d}"
    part += _MONTH_LETTERS[person.birthdate.month - 1]
    day = person.birthdate.day + (40 if person.sex == "F" else 0)
    part += f"{day:02d}"
    part += person.cadastral_code.upper()
    return part + fiscal_check_char(part)


# ---------------------------------------------------------------------------
# Machine-readable zones


def mrz_check_digit(s: str) -> str:
    """Standard 7-3-1 weighted check digit over the MRZ charset."""
    weights = (7, 3, 1)
    total = 0
    for i, ch in enumerate(s):
        if ch.isdigit():
            v = int(ch)
        elif "A" <= ch <= "Z":
            v = ord(ch) - ord("A") + 10
        elif ch == "<":
            v = 0
        else:
            raise ValueError(f"invalid MRZ character {ch!r}")
        total += v * weights[i % 3]
    return str(total % 10)


def _mrz_name(surname: str, name: str, width: int) -> str:
    s = surname.replace(" ", "<") + "<<" + name.replace(" ", "<")
    return s[:width].ljust(width, "<")


def _mrz_date(d: date) -> str:
    return f"{d.year % 100:02d}{d.month:02d}{d.day:02d}"


def passport_mrz(person: PersonRecord) -> tuple[str, str]:
    """TD3-format pair of 44-character lines."""
    line1 = ("P<ITA" + _mrz_name(person.surname, person.name, 39))
    num = person.document_number[:9].ljust(9, "<")
    dob = _mrz_date(person.birthdate)
    exp = _mrz_date(person.expiry_date)
    body = (
        num + mrz_check_digit(num)
        + "ITA"
        + dob + mrz_check_digit(dob)
        + person.sex
        + exp + mrz_check_digit(exp)
        + "<" * 14 + mrz_check_digit("<" * 14)
    )
    line2 = body + mrz_check_digit(
        body[0:10] + body[13:20] + body[21:43]
    )
    assert len(line1) == 44 and len(line2) == 44
    return line1, line2


def electronic_id_mrz(person: PersonRecord) -> tuple[str, str, str]:
    """TD1-format triple of 30-character lines."""
    num = person.document_number[:9].ljust(9, "<")
    line1 = "C<ITA" + num + mrz_check_digit(num) + "<" * 15
    dob = _mrz_date(person.birthdate)
    exp = _mrz_date(person.expiry_date)
    line2 = (
        dob + mrz_check_digit(dob)
        + person.sex
        + exp + mrz_check_digit(exp)
        + "ITA"
        + "<" * 11
    )
    composite = line1[5:30] + line2[0:7] + line2[8:15] + line2[18:29]
    line2 += mrz_check_digit(composite)
    line3 = _mrz_name(person.surname, person.name, 30)
    assert len(line1) == 30 and len(line2) == 30 and len(line3) == 30
    return line1, line2, line3


def format_date(d: date) -> str:
    return f"{d.day:02d}.{d.month:02d}.{d.year:04d}"


# field name -> string, per class; drives both rendering and truth maps
def field_values_for(doc_class: DocumentClass, person: PersonRecord, rng=None) -> dict[str, str]:
    c = DocumentClass(doc_class)
    if c == DocumentClass.PAPER_ID_FRONT:
        return {
            "SURNAME": person.surname,
            "NAME": person.name,
            "BIRTHDATE": format_date(person.birthdate),
            "BIRTHPLACE": person.birthplace,
        }
    if c == DocumentClass.PAPER_ID_BACK:
        return {
            "ADDRESS": person.address,
            "DOCUMENT_NUMBER": person.document_number,
            "RELEASE_DATE": format_date(person.release_date),
            "EXPIRY_DATE": format_date(person.expiry_date),
        }
    if c == DocumentClass.ELECTRONIC_ID_FRONT:
        return {
            "SURNAME": person.surname,
            "NAME": person.name,
            "BIRTHDATE": format_date(person.birthdate),
            "DOCUMENT_NUMBER": person.document_number,
            "EXPIRY_DATE": format_date(person.expiry_date),
        }
    if c == DocumentClass.ELECTRONIC_ID_BACK:
        m1, m2, m3 = electronic_id_mrz(person)
        return {
            "FISCAL_CODE": person.fiscal_code,
            "ADDRESS": person.address,
            "MRZ1": m1,
            "MRZ2": m2,
            "MRZ3": m3,
        }
    if c == DocumentClass.DRIVING_LICENSE_FRONT:
        return {
            "SURNAME": person.surname,
            "NAME": person.name,
            "BIRTHDATE": format_date(person.birthdate),
            "RELEASE_DATE": format_date(person.release_date),
            "EXPIRY_DATE": format_date(person.expiry_date),
            "DOCUMENT_NUMBER": person.document_number,
        }
    if c == DocumentClass.DRIVING_LICENSE_BACK:
        cats = ["A", "B", "AB", "BE"]
        cat = cats[int(rng.integers(0, len(cats)))] if rng is not None else "B"
        return {
            "DOCUMENT_NUMBER": person.document_number,
            "CATEGORIES": cat,
        }
    if c == DocumentClass.HEALTH_CARD_FRONT:
        return {
            "SURNAME": person.surname,
            "NAME": person.name,
            "FISCAL_CODE": person.fiscal_code,
            "BIRTHDATE": format_date(person.birthdate),
            "EXPIRY_DATE": format_date(person.expiry_date),
        }
    if c == DocumentClass.HEALTH_CARD_BACK:
        return {
            "FISCAL_CODE": person.fiscal_code,
            "DOCUMENT_NUMBER": person.document_number,
            "EXPIRY_DATE": format_date(person.expiry_date),
        }
    if c == DocumentClass.PASSPORT:
        m1, m2 = passport_mrz(person)
        return {
            "SURNAME": person.surname,
            "NAME": person.name,
            "BIRTHDATE": format_date(person.birthdate),
            "RELEASE_DATE": format_date(person.release_date),
            "EXPIRY_DATE": format_date(person.expiry_date),
            "DOCUMENT_NUMBER": person.document_number,
            "MRZ1": m1,
            "MRZ2": m2,
        }
    raise ValueError(f"unknown class {doc_class}")
