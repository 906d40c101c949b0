#!/usr/bin/env python3
"""Generate the exhaustive CVSS v3.1 base-score oracle table.

Independent oracle for the conformance suite: every arithmetic step runs in
exact decimal arithmetic (no binary floating point), transcribed directly from
the public CVSS v3.1 specification. The production engine must never import
this; the only shared artifact is the frozen JSON table this script writes to
tests/data/cvss31_oracle.json.

Run once:  python tools/gen_cvss_oracle.py
"""

import itertools
import json
from decimal import Decimal, ROUND_CEILING, ROUND_HALF_UP, getcontext
from pathlib import Path

getcontext().prec = 120

AV = {"N": Decimal("0.85"), "A": Decimal("0.62"), "L": Decimal("0.55"), "P": Decimal("0.2")}
AC = {"L": Decimal("0.77"), "H": Decimal("0.44")}
PR_UNCHANGED = {"N": Decimal("0.85"), "L": Decimal("0.62"), "H": Decimal("0.27")}
PR_CHANGED = {"N": Decimal("0.85"), "L": Decimal("0.68"), "H": Decimal("0.5")}
UI = {"N": Decimal("0.85"), "R": Decimal("0.62")}
CIA = {"N": Decimal("0"), "L": Decimal("0.22"), "H": Decimal("0.56")}


def roundup(value: Decimal) -> Decimal:
    """Specification round-up: snap to 5 decimals (half-up, matching the
    reference pseudocode's nearest-integer step), then take the least
    one-decimal value that is >= the result."""
    snapped = value.quantize(Decimal("0.00001"), rounding=ROUND_HALF_UP)
    return snapped.quantize(Decimal("0.1"), rounding=ROUND_CEILING)


def base_score(av: str, ac: str, pr: str, ui: str, s: str, c: str, i: str, a: str) -> Decimal:
    one = Decimal(1)
    iss = one - (one - CIA[c]) * (one - CIA[i]) * (one - CIA[a])
    if s == "U":
        impact = Decimal("6.42") * iss
    else:
        impact = Decimal("7.52") * (iss - Decimal("0.029")) - Decimal("3.25") * (
            iss - Decimal("0.02")
        ) ** 15
    pr_weight = PR_UNCHANGED[pr] if s == "U" else PR_CHANGED[pr]
    exploitability = Decimal("8.22") * AV[av] * AC[ac] * pr_weight * UI[ui]
    if impact <= 0:
        return Decimal("0.0")
    if s == "U":
        raw = impact + exploitability
    else:
        raw = Decimal("1.08") * (impact + exploitability)
    return roundup(min(raw, Decimal(10)))


def main() -> None:
    table = {}
    for av, ac, pr, ui, s, c, i, a in itertools.product(
        "NALP", "LH", "NLH", "NR", "UC", "NLH", "NLH", "NLH"
    ):
        vector = f"AV:{av}/AC:{ac}/PR:{pr}/UI:{ui}/S:{s}/C:{c}/I:{i}/A:{a}"
        table[vector] = str(base_score(av, ac, pr, ui, s, c, i, a))
    out = Path(__file__).resolve().parent.parent / "tests" / "data" / "cvss31_oracle.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(table, indent=0, sort_keys=True) + "\n")
    print(f"wrote {len(table)} vectors to {out}")


if __name__ == "__main__":
    main()
