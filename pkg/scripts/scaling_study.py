"""Reproduce the sparse-matrix memory/time scaling study on simulated data.

Times likelihood and gradient evaluations across grid resolutions for both
model-matrix layouts, prints the fitted log-log slope in n, the sensitivity
to the number of basis functions, and the lag-grid dependence of the direct
layout, and writes the raw rows as CSV.

    python3 scripts/scaling_study.py --out results/scaling
"""

import argparse
from pathlib import Path

import numpy as np

from ppfilt.bench import hawkes_like_data, rows_to_csv, run_cells


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("results/scaling"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reps", type=int, default=24)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    data = hawkes_like_data(t_end=200.0, seed=args.seed)
    slope_cells = [
        (mode, n, 200, 50)
        for mode in ("direct", "basis")
        for n in (5000, 10000, 20000, 40000)
    ]
    q_cells = [("basis", 40000, 400, 33), ("basis", 40000, 400, 100)]
    n_cells = [("direct", 40000, dn, 100) for dn in (100, 800, 1600)]
    rows = run_cells(data, slope_cells + q_cells + n_cells, reps=args.reps)
    (args.out / "bench.csv").write_text(rows_to_csv(rows))

    for mode in ("direct", "basis"):
        sel = [r for r in rows[:8] if r.mode == mode]
        slope = np.polyfit(np.log([r.n for r in sel]), np.log([r.nll_ms for r in sel]), 1)[0]
        print(f"{mode}: nll time vs n slope {slope:.2f} "
              f"({', '.join(f'{r.n}:{r.nll_ms:.3f}ms' for r in sel)})")
    q33, q100 = rows[8:10]
    print(f"basis q 33 -> 100: nll {q33.nll_ms:.3f} -> {q100.nll_ms:.3f} ms "
          f"({(q100.nll_ms / q33.nll_ms - 1):+.1%})")
    trend = ", ".join(f"N={r.delta_n}:{r.nll_ms:.3f}ms" for r in rows[10:])
    print(f"direct lag-grid dependence: {trend}")
    h_row = rows[10]
    print(f"memory at n={h_row.n}: sparse {h_row.sparse_bytes / 1e6:.2f} MB "
          f"vs dense {h_row.dense_bytes / 1e6:.0f} MB")
    print(f"wrote {args.out / 'bench.csv'}")


if __name__ == "__main__":
    main()
