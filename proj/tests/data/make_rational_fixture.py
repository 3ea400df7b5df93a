#!/usr/bin/env python3
"""Freezes expected exact values for the answer normalization fixture.

Uses Python's fractions/decimal modules as an oracle independent of the C++
parser. Rerun after editing CASES:  python3 make_rational_fixture.py
"""

import json
import re
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

CASES = [
    "4", "-4", "+4", " 72 ", "007", "1,000", "12,345,678", "1,000.50", "0.5", ".5",
    "2.0", "2.50", "-0.25", "3.14159", "100.000", "$5", "\\$12.75", "$-3", "-$3", "2/3",
    "4/6", "-2/3", "6/3", "0/5", "1.5/3", "\\frac{2}{3}", "\\frac{4}{6}", "\\dfrac{1}{2}", "\\tfrac{3}{4}",
    "\\frac12", "\\frac{10}{4}", "-\\frac{1}{8}", "$\\frac{1}{2}$", "\\(3/4\\)", "\\text{42}", "$$7$$",
    "1/0", "\\frac{1}{0}", "2/3/4", "1,00", "12,3456", "abc", "x/2", "", "-", ".", "1e5", "3 1/2",
    "0.000001", "999999999999999999999999",
]

FRAC = re.compile(r"^\\[dt]?frac\{\s*([^{}]+?)\s*\}\{\s*([^{}]+?)\s*\}$")
FRAC_SHORT = re.compile(r"^\\[dt]?frac(\d)(\d)$")
SLASH = re.compile(r"^([^/\s]+)\s*/\s*([^/\s]+)$")
GROUPED = re.compile(r"^\d{1,3}(,\d{3})+(\.\d+)?$")
PLAIN = re.compile(r"^\d*(\.\d+)?$")


def unwrap(s):
    while True:
        s = s.strip()
        if len(s) >= 2 and s[0] == "$" and s[-1] == "$":
            s = s[1:-1]
        elif len(s) >= 4 and s.startswith("\\(") and s.endswith("\\)"):
            s = s[2:-2]
        elif s.startswith("\\text{") and s.endswith("}"):
            s = s[6:-1]
        else:
            return s


def decimal(s):
    if GROUPED.match(s):
        s = s.replace(",", "")
    elif not PLAIN.match(s) or s in ("", "."):
        return None
    return Decimal(s)


def oracle(raw):
    s = unwrap(raw)
    neg = False
    if s[:1] in "+-" and s:
        neg = s[0] == "-"
        s = s[1:].strip()
    if s.startswith("\\$"):
        s = s[2:]
    elif s.startswith("$"):
        s = s[1:]
    s = s.strip()
    if s.startswith("-") and not neg:
        neg, s = True, s[1:].strip()
    m = FRAC.match(s) or FRAC_SHORT.match(s) or SLASH.match(s)
    if m:
        a, b = decimal(m.group(1)), decimal(m.group(2))
        if a is None or b is None or b == 0:
            return None
        v, kind = Fraction(a) / Fraction(b), "fraction"
    else:
        d = decimal(s)
        if d is None:
            return None
        v, kind = Fraction(d), "decimal"
    if neg:
        v = -v
    if v.denominator == 1:
        norm = str(v.numerator)
    elif kind == "fraction":
        norm = f"{v.numerator}/{v.denominator}"
    else:
        norm = format(Decimal(v.numerator) / Decimal(v.denominator), "f").rstrip("0")
    return v, norm


out = []
for raw in CASES:
    r = oracle(raw)
    out.append({
        "raw": raw,
        "value": None if r is None else (str(r[0].numerator) + ("" if r[0].denominator == 1 else "/" + str(r[0].denominator))),
        "normalized": None if r is None else r[1],
    })
assert len(out) == 50, len(out)
Path(__file__).with_name("rational_fixture.json").write_text(json.dumps(out, indent=1) + "\n")
