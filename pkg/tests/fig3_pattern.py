"""Qualitative summary of the three-site Fig. 3 sweep, used as a regression fixture.

Run ``python3 tests/fig3_pattern.py`` to regenerate ``tests/fixtures/fig3_l3_pattern.csv``.
Each fixture line covers one (tau, detector) pair:

* ``flags``: one character per overlap in ascending order, ``.`` for a finite
  time, ``T`` for undefined_trapped and ``Z`` for undefined_zero_detection;
* ``resonant``: the is_resonant column;
* ``trend``: how the finite times change with the signed overlap.
"""

from __future__ import annotations

import csv
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

FIXTURE = Path(__file__).resolve().parent / "fixtures" / "fig3_l3_pattern.csv"
TREND_TOL = 5e-3
FIELDS = ("tau_J_per_hbar", "detector", "flags", "resonant", "trend")
_FLAG_CHAR = {None: ".", "undefined_trapped": "T", "undefined_zero_detection": "Z"}


def trend(values) -> str:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return "n/a"
    d = np.diff(v) / np.abs(v[:-1])
    if np.all(np.abs(d) <= TREND_TOL):
        return "flat"
    if np.all(d >= -TREND_TOL):
        return "increasing"
    if np.all(d <= TREND_TOL):
        return "decreasing"
    return "mixed"


def summarize(rows) -> list[dict]:
    groups: dict = defaultdict(list)
    order = []
    for r in rows:
        key = (r.tau, r.detector)
        if key not in groups:
            order.append(key)
        groups[key].append(r)
    out = []
    for key in order:
        g = sorted(groups[key], key=lambda r: r.overlap_signed)
        out.append({
            "tau_J_per_hbar": repr(float(key[0])),
            "detector": key[1],
            "flags": "".join(_FLAG_CHAR[None if r.flag is None else r.flag.value] for r in g),
            "resonant": "true" if g[0].is_resonant else "false",
            "trend": trend([r.t_first for r in g if r.t_first is not None]),
        })
    return out


def load_fixture() -> list[dict]:
    with FIXTURE.open(newline="") as fh:
        return list(csv.DictReader(fh))


def main() -> int:
    import tempfile

    from firstdetect.sweep import reproduce_fig3

    with tempfile.TemporaryDirectory() as tmp:
        result = reproduce_fig3(3, tmp, svg=False)
    FIXTURE.parent.mkdir(exist_ok=True)
    with FIXTURE.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(summarize(result.rows))
    print(f"wrote {FIXTURE}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
