"""Run continuous greedy on a high-girth 3-regular graph and on a long cycle.

    python3 demos/hard_instance.py [n] [girth]
"""

import sys

from mmlab import algorithms as al
from mmlab import graphs as gl
from mmlab import labels as la
from mmlab import simulate as sim

CONT = la.LabelModel.continuous()


def main(n=2000, girth=8):
    g, cert = gl.sample_hard_instance(n, 3, girth, seed=0, method="auto")
    print(f"instance: n={g.n}, girth={cert.girth}, regular={cert.regular}, simple={cert.simple}")
    f = al.verified(al.greedy_min_label(la.Shape(3, 1), CONT), method="sampled", trials=1000)
    rep = sim.survival_stats(f, g, 200, seed=0)
    print(f"  unmatched fraction {rep.mean_fraction:.4f} +- {rep.stderr():.4f} (high-girth value 2/5)")

    c = gl.cycle_graph(100_000)
    f2 = al.verified(al.greedy_min_label(la.Shape(2, 1), CONT), method="sampled", trials=1000)
    rep = sim.survival_stats(f2, c, 20, seed=0)
    print(f"cycle C_100000: unmatched fraction {rep.mean_fraction:.4f} (1/3 expected)")
    for row in rep.concentration:
        print(f"  lower tail at lambda={row['lambda']}: empirical {row['empirical']:.3g} <= bound {row['bound']:.3g}")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:3]))
