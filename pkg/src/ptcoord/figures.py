"""Figure rendering for the report paths.

Each experiment command drops a PNG next to its CSV so results are
glanceable without a notebook; the CSVs stay the canonical record.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_convergence_figure(trace_rows, path) -> None:
    """Bound trajectories over the iterations of one run."""
    iters = [r.iteration for r in trace_rows]
    relax = [None if r.relaxation_bound is None else float(r.relaxation_bound)
             for r in trace_rows]
    incumbent = [None if r.incumbent_bound is None else float(r.incumbent_bound)
                 for r in trace_rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(iters, relax, marker="o", label="master relaxation")
    ax.plot(iters, incumbent, marker="s", label="best incumbent")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective bound")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_budget_figure(rows, path) -> None:
    """Objectives and division spend across the budget-fraction sweep.

    ``rows`` follow the budget-study CSV layout:
    (Bc, seed, status, leader_objective, pd_id, pd_cost, pd_budget_spent).
    """
    seeds = sorted({r[1] for r in rows})
    seed = seeds[0]
    rows = [r for r in rows if r[1] == seed]
    fractions = sorted({float(r[0]) for r in rows})
    pds = sorted({r[4] for r in rows})

    def pick(bc, pd, col):
        for r in rows:
            if float(r[0]) == bc and (pd is None or r[4] == pd):
                return float("nan") if r[col] is None else float(r[col])
        return float("nan")

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(fractions, [pick(bc, None, 3) for bc in fractions],
             marker="o", color="black", label="leader")
    for pd in pds:
        ax1.plot(fractions, [pick(bc, pd, 5) for bc in fractions],
                 marker="s", label=f"{pd} cost")
    ax1.set_xlabel("budget fraction")
    ax1.set_ylabel("objective value")
    ax1.legend(fontsize=8)
    ax1.grid(True, alpha=0.3)
    for pd in pds:
        ax2.plot(fractions, [pick(bc, pd, 6) for bc in fractions],
                 marker="o", label=f"{pd} spend")
    ax2.set_xlabel("budget fraction")
    ax2.set_ylabel("budget consumed")
    ax2.legend(fontsize=8)
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_competition_figure(rows, path) -> None:
    """Leader objective and mean division cost against the division count.

    ``rows`` follow the competition CSV layout:
    (class_idx, T, J, N_j, P_j, seed, status, leader_objective, mean_pd_cost).
    """
    counts = sorted({r[2] for r in rows})
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for seed in sorted({r[5] for r in rows}):
        mine = {r[2]: r for r in rows if r[5] == seed}
        ax1.plot(
            counts,
            [float(mine[j][7]) if mine[j][7] is not None else float("nan") for j in counts],
            marker="o", label=f"seed {seed}",
        )
        ax2.plot(
            counts,
            [float(mine[j][8]) if mine[j][8] is not None else float("nan") for j in counts],
            marker="s", label=f"seed {seed}",
        )
    ax1.set_xlabel("number of divisions")
    ax1.set_ylabel("leader objective")
    ax1.grid(True, alpha=0.3)
    ax1.legend(fontsize=8)
    ax2.set_xlabel("number of divisions")
    ax2.set_ylabel("mean division cost")
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
