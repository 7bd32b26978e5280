#!/usr/bin/env python3
"""Generate the frozen response-parser conformance corpus.

Each case is a raw model response plus the expected criterion count and a
hand-specified classification:

  ok              -> parses to the listed scores
  parse           -> rejected as not a bare integer / bracketed integer list
  count_mismatch  -> integer list of the wrong length
  range           -> a score outside [1, 7]

The expected labels are computed here by an independent re-statement of the
documented response grammar (trim; bare ASCII integer only when one score is
expected; otherwise a single [a, b, ...] list; count checked before range),
so the corpus doubles as a second implementation to test against.

Usage: python3 tools/gen_parser_corpus.py > crates/core/tests/data/parser_corpus.json
"""

import json
import re
import sys

INT = re.compile(r"[+-]?[0-9]+\Z", re.ASCII)


def classify(text, expected):
    trimmed = text.strip()
    if not trimmed:
        return {"classification": "parse"}
    if trimmed.startswith("["):
        if not trimmed.endswith("]") or len(trimmed) < 2:
            return {"classification": "parse"}
        tokens = [t.strip() for t in trimmed[1:-1].split(",")]
    else:
        if expected != 1:
            return {"classification": "parse"}
        tokens = [trimmed]
    values = []
    for tok in tokens:
        if not INT.match(tok):
            return {"classification": "parse"}
        values.append(int(tok))
    if len(values) != expected:
        return {"classification": "count_mismatch"}
    for v in values:
        if not 1 <= v <= 7:
            return {"classification": "range"}
    return {"classification": "ok", "scores": values}


def case(text, expected):
    out = {"text": text, "expected": expected}
    out.update(classify(text, expected))
    return out


def main():
    cases = []

    # --- well-formed single scores (expected 1) ---
    for v in range(1, 8):
        cases.append(case(str(v), 1))
        cases.append(case(f"  {v}  ", 1))
        cases.append(case(f"{v}\n", 1))
        cases.append(case(f"[{v}]", 1))
    cases.append(case("+5", 1))
    cases.append(case("[ 3 ]", 1))

    # --- well-formed lists (expected 5 and 14) ---
    lists5 = [
        [4, 5, 3, 6, 5], [1, 1, 1, 1, 1], [7, 7, 7, 7, 7],
        [2, 6, 4, 3, 5], [5, 4, 5, 4, 5], [3, 3, 4, 4, 5],
        [6, 2, 1, 7, 3], [1, 7, 1, 7, 1], [4, 4, 4, 4, 4],
        [2, 3, 4, 5, 6],
    ]
    for v in lists5:
        cases.append(case("[" + ", ".join(map(str, v)) + "]", 5))
        cases.append(case("[" + ",".join(map(str, v)) + "]", 5))
    lists14 = [
        list(range(1, 8)) + list(range(7, 0, -1)),
        [4] * 14,
        [1, 7] * 7,
        [5, 4, 6, 3, 5, 4, 6, 2, 5, 5, 4, 6, 3, 5],
        [2] * 7 + [6] * 7,
    ]
    for v in lists14:
        cases.append(case("[" + ", ".join(map(str, v)) + "]", 14))
        cases.append(case("  [" + ", ".join(map(str, v)) + "]\n", 14))

    # --- wrong counts ---
    for n_got, n_want in [(4, 5), (6, 5), (1, 5), (13, 14), (15, 14), (5, 14),
                          (2, 1), (14, 5), (3, 1), (0o7, 5)]:
        body = ", ".join(["4"] * n_got)
        cases.append(case(f"[{body}]", n_want))

    # --- out-of-range scores ---
    for text, expected in [
        ("0", 1), ("8", 1), ("-3", 1), ("100", 1), ("[0]", 1), ("[9]", 1),
        ("[4, 5, 0, 6, 5]", 5), ("[4, 5, 8, 6, 5]", 5), ("[-1, 2, 3, 4, 5]", 5),
        ("[7, 7, 7, 7, 77]", 5),
        ("[" + ", ".join(["4"] * 13 + ["8"]) + "]", 14),
        ("[" + ", ".join(["0"] + ["4"] * 13) + "]", 14),
    ]:
        cases.append(case(text, expected))

    # --- extra prose and malformed shapes ---
    prose = [
        ("Score: 5", 1), ("5 out of 7", 1), ("I would rate this a 6.", 1),
        ("[4, 5, 3, 6, 5] because the street is lively", 5),
        ("The scores are [4, 5, 3, 6, 5]", 5),
        ("five", 1), ("N/A", 1), ("", 1), ("   ", 1), ("\n\n", 5),
        ("5.0", 1), ("4.5", 1), ("[4.5, 5, 3, 6, 5]", 5),
        ("[4; 5; 3; 6; 5]", 5), ("[4 5 3 6 5]", 5),
        ("[[4, 5, 3, 6, 5]]", 5), ("[4, 5, 3, 6, 5", 5), ("4, 5, 3, 6, 5]", 5),
        ("4, 5, 3, 6, 5", 5), ("(4, 5, 3, 6, 5)", 5),
        ("{\"score\": 5}", 1), ("{\"scores\": [4, 5, 3, 6, 5]}", 5),
        ("[4, 5, 3, 6, 5,]", 5), ("[, 4, 5, 3, 6, 5]", 5),
        ("[]", 5), ("[]", 1), ("[ ]", 1),
        ("seven", 1), ("7/7", 1), ("**5**", 1), ("`5`", 1),
        ("rating=5", 1), ("answer: [4, 4, 4, 4, 4]", 5),
        ("[four, five, three, six, five]", 5),
        ("[4, five, 3, 6, 5]", 5),
        ("3-4", 1), ("~5", 1), ("5!", 1), ("5 ", 5),
        ("[0x4]", 1), ("[4e0]", 1), ("[ 4 , 5 , 3 , 6 , 5 ]", 5),
        ("\t6\t", 1), ("[1,2,3,4,5,6,7,1,2,3,4,5,6,7]", 14),
        ("[1,2,3,4,5,6,7,1,2,3,4,5,6,7] ok?", 14),
        ("１", 1),  # full-width digit must be rejected
        ("[4, 5, 3, 6, 5]\nHope that helps!", 5),
    ]
    for text, expected in prose:
        cases.append(case(text, expected))

    # --- systematic fill to 200: deterministic valid/invalid alternation ---
    i = 0
    while len(cases) < 200:
        k = i % 4
        if k == 0:
            v = [(i * 3 + j) % 7 + 1 for j in range(5)]
            cases.append(case("[" + ", ".join(map(str, v)) + "]", 5))
        elif k == 1:
            v = [(i * 5 + j) % 7 + 1 for j in range(14)]
            cases.append(case("[" + ", ".join(map(str, v)) + "]", 14))
        elif k == 2:
            cases.append(case(str(i % 7 + 1), 1))
        else:
            v = [(i * 3 + j) % 7 + 1 for j in range(5)]
            v[i % 5] = 8 + i % 3  # inject an out-of-range score
            cases.append(case("[" + ", ".join(map(str, v)) + "]", 5))
        i += 1

    assert len(cases) == 200, len(cases)
    json.dump(cases, sys.stdout, indent=1, ensure_ascii=False)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
