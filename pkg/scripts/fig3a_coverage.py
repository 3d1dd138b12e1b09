"""Sensing coverage versus SINR threshold for several cluster sizes."""
from _common import pivot, run

if __name__ == "__main__":
    run("coverage", "fig3a.toml", lambda t: pivot(t, "n_c", "tau_db", "coverage"), __doc__)
