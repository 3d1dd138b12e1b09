"""Meta-distribution of the conditional sensing coverage at a 5 dB threshold."""
from _common import pivot, run

if __name__ == "__main__":
    run("meta", "fig3b.toml", lambda t: pivot(t, "n_c", "t", "meta_ccdf"), __doc__)
