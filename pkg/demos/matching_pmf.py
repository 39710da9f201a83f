"""Exact intersection law of a fixed k-set with a uniform perfect matching.

    python3 demos/matching_pmf.py [n] [k]
"""

import sys

from mmlab import graphs as gl


def main(n=40, k=20):
    support = gl.matching_support(n, k)
    p = [gl.matching_intersection_pmf_exact(n, k, t) for t in support]
    print(f"n={n}, k={k}: mean {float(gl.matching_mean(n, k)):.4f}, ultra-log-concave {gl.is_ultra_log_concave(p)}")
    for t, pt in zip(support, p):
        print(f"  t={t:>2}  {float(pt):.6f}")
    for d in (0.25, 0.5):
        up, lo = gl.matching_tails(n, k, d)
        b_up, b_lo = gl.matching_tail_bounds(n, k, d)
        print(f"delta={d}: upper tail {float(up):.3g} <= {b_up:.3g}, lower tail {float(lo):.3g} <= {b_lo:.3g}")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:3]))
