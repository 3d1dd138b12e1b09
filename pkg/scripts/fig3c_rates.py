"""Ergodic sensing and downlink rates versus BS density.

Prints the rate grid and the density maximising each curve.
"""
from _common import pivot, run


def summarize(table):
    pivot(table, "n_c", "density_per_km2", "rate_nats")
    rows = [dict(zip(table.columns, r)) for r in table.rows]
    for eng in sorted({r["engine"] for r in rows}):
        groups = {}
        for r in rows:
            if r["engine"] == eng:
                label = "comm" if r["quantity"] == "comm" else f"N_c={r['n_c']}"
                groups.setdefault(label, []).append((float(r["rate_nats"]), float(r["density_per_km2"])))
        best = ", ".join(f"{k}: {max(v)[1]:g}/km^2" for k, v in groups.items())
        print(f"[{eng}] rate-maximising density  {best}")


if __name__ == "__main__":
    run("rates", "fig3c.toml", summarize, __doc__)
