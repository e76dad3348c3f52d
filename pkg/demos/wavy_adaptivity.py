"""Why the geometry matters for the error estimator.

On the wavy channel the bottom wall is a fitted NURBS curve.  With NEFEM the
estimator tracks the exact error and the adaptive loop stops at the right
place.  With a fixed linear geometry the solution converges to the wrong
domain: the estimator still drops below the tolerance while the exact error
stays large.

    python demos/wavy_adaptivity.py
"""
from hdgnefem.benchmarks import benchmark_wavy_channel
from hdgnefem.geometry import NEFEM, iso_fixed
from hdgnefem.studies import run_adapt_compare

eps = 0.5e-2
comp = run_adapt_compare(benchmark_wavy_channel(), [NEFEM, iso_fixed(1)], [eps])
for (strategy, _), rep in comp.reports.items():
    print(f"\n{strategy}: converged={rep.converged}")
    print(f"{'iter':>4} {'max E_e':>10} {'max exact':>10} {'dofs':>6}")
    for it, est, exact, dofs in rep.rows():
        print(f"{it:4d} {est:10.3e} {exact:10.3e} {dofs:6d}")
    print(f"final exact / eps = {rep.final.max_exact / eps:.1f}")
