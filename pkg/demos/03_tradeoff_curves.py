"""Error/size trade-off curves: fixed-size vs averaged constraints.

Sweeping each formulation's budget over a grid traces its trade-off
curve.  Relaxing a point-wise constraint to an average one can only help,
so the averaged curves sit below their fixed-size counterparts.  Curves
are written as CSV; a PNG is rendered when matplotlib is available.
"""

import numpy as np

from predsets import FormulationSpec, Kind, sweep
from predsets.io import write_curve
from predsets.oracle import make_distribution, sample_scores

L = 10
dist = make_distribution("two-regime", L, seed=4)
calib = sample_scores(dist, 10_000, seed=4)
test = sample_scores(dist, 10_000, seed=5)

print("sweeping the size-constrained formulations (10 bootstrap repeats)")
top_curve = sweep(
    FormulationSpec(Kind.TOP_K, k=1), list(range(1, L + 1)), calib, test
)
avg_curve = sweep(
    FormulationSpec(Kind.AVERAGE_SIZE, kbar=1.0),
    [float(k) for k in range(1, L + 1)],
    calib,
    test,
)
write_curve("topk_curve.csv", top_curve)
write_curve("avgsize_curve.csv", avg_curve)

print(f"{'budget':>8} {'top-k error':>12} {'avg-size error':>15}")
for pt_top, pt_avg in zip(top_curve.points, avg_curve.points):
    print(
        f"{pt_top.param:>8.0f} {pt_top.avg_error:>12.4f} "
        f"{pt_avg.avg_error:>15.4f}"
    )

print("\nsweeping the error-constrained formulations")
grid = [0.01, 0.02, 0.05, 0.1, 0.2, 0.4]
pw_curve = sweep(
    FormulationSpec(Kind.POINTWISE_ERROR, eps=0.5), grid, calib, test
)
ae_curve = sweep(
    FormulationSpec(Kind.AVERAGE_ERROR, ebar=0.5), grid, calib, test
)
write_curve("pointwise_curve.csv", pw_curve)
write_curve("avgerror_curve.csv", ae_curve)

print(f"{'budget':>8} {'point-wise size':>16} {'avg-error size':>15}")
for pt_pw, pt_ae in zip(pw_curve.points, ae_curve.points):
    print(
        f"{pt_pw.param:>8.2f} {pt_pw.avg_size:>16.3f} "
        f"{pt_ae.avg_size:>15.3f}"
    )

print("\ncurves written to topk/avgsize/pointwise/avgerror _curve.csv")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the plot")
else:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.step(
        [pt.param for pt in top_curve.points],
        [pt.avg_error for pt in top_curve.points],
        where="post",
        label="fixed size k",
    )
    ax1.plot(
        [pt.param for pt in avg_curve.points],
        [pt.avg_error for pt in avg_curve.points],
        marker="o",
        label="average size budget",
    )
    ax1.set_xlabel("size budget")
    ax1.set_ylabel("held-out error")
    ax1.legend()
    ax2.plot(
        [pt.param for pt in pw_curve.points],
        [pt.avg_size for pt in pw_curve.points],
        marker="s",
        label="point-wise error budget",
    )
    ax2.plot(
        [pt.param for pt in ae_curve.points],
        [pt.avg_size for pt in ae_curve.points],
        marker="o",
        label="average error budget",
    )
    ax2.set_xlabel("error budget")
    ax2.set_ylabel("held-out avg size")
    ax2.legend()
    fig.tight_layout()
    fig.savefig("tradeoff_curves.png", dpi=120)
    print("plot written to tradeoff_curves.png")
