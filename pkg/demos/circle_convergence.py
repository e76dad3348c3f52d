"""h-convergence on the circle benchmark with both geometry backends.

A coarse 16-element disc is refined three times.  Each run uses one degree
everywhere and follows the element nearest the centre; the fitted slopes show
the k+2 rate of u, L and p and the k+3 rate of the postprocessed u*.

    python demos/circle_convergence.py
"""
from hdgnefem.benchmarks import benchmark_circle
from hdgnefem.geometry import ISO_REGEN, NEFEM
from hdgnefem.studies import run_convergence

bench = benchmark_circle()
for strategy in (NEFEM, ISO_REGEN):
    table = run_convergence(bench, strategy, levels=4, degrees=(1, 2), mode="uniform")
    print(f"\n{strategy}  ({table.seconds:.1f}s)")
    print(f"{'level':>5} {'h':>8} {'k':>2} {'u':>10} {'u*':>10} {'L':>10} {'p':>10}")
    for level, h, k, *errs in table.rows:
        print(f"{level:5d} {h:8.4f} {k:2d} " + " ".join(f"{e:10.3e}" for e in errs))
    for k, s in table.slopes.items():
        print(f"slopes k={k}: " + "  ".join(f"{f}={v:.2f}" for f, v in s.items()))
