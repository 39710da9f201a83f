"""Survival of the greedy rule and the round-elimination chain it collapses to.

    python3 demos/greedy_elimination.py
"""

from mmlab import algorithms as al
from mmlab import elimination as el
from mmlab import labels as la


def main():
    print("exact survival of greedy min-label (discrete labels)")
    for delta in (2, 3):
        for L in (2, 3):
            f = al.greedy_min_label(la.Shape(delta, 1), la.LabelModel.discrete(L))
            p = al.survival_probability(f)
            print(f"  delta={delta} L={L}: P_f = {p.exact} ({float(p.exact):.4f})")

    f = al.lift(al.greedy_min_label(la.Shape(2, 1), la.LabelModel.discrete(2)), 2)
    print(f"\nelimination chain from a radius-{f.radius} lift of greedy, delta=2, L=2")
    rep = el.audit(f)
    print(f"  audit passed: {rep.passed} ({len(rep.entries)} entries)")
    for g in el.eliminate_chain(f):
        ones = int(g.table.sum())
        print(f"  radius {g.radius}: {ones} accepting flowers of {len(g.table)}, "
              f"P = {al.survival_probability(g).exact}")


if __name__ == "__main__":
    main()
