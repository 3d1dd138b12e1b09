"""Downlink, sensing and total rate versus the sensing energy fraction."""
from _common import pivot, run


def summarize(table):
    for col in ("comm_rate", "sensing_rate", "total_rate"):
        pivot(table, "n_c", "gamma", col)


if __name__ == "__main__":
    run("gamma", "fig3d.toml", summarize, __doc__)
