#!/usr/bin/env python3
"""Recompute majority baselines, relative gain and PP+ from published F1 numbers."""

from privfill.evaluation.metrics import EvalInputs, majority_f1, pp_plus, relative_gain

# (dataset, majority fraction for utility, for privacy)
BASELINES = {
    "trustpilot": (2713 / 2949, None),
    "yelp": (1618 / 1730, 304 / 1730),
}

ROWS = [
    # dataset, system, U_o, U_r, P_o, P_r, MG_u, MG_p
    ("trustpilot", "dp-bart eps=1000", 99.57, 98.16, 72.46, 59.47, 95.83, 66.67),
    ("trustpilot", "privfill large", 99.57, 98.63, 72.46, 60.16, 95.83, 66.67),
    ("yelp", "dp-prompt eps=2", 95.03, 93.49, 96.30, 19.44, 96.65, 29.89),
]


def main():
    for name, (pu, pp) in BASELINES.items():
        parts = [f"utility MG={majority_f1(pu):.2f}"]
        if pp is not None:
            parts.append(f"privacy MG={majority_f1(pp):.2f}")
        print(f"{name:<11} " + "  ".join(parts))
    print()
    print(f"{'dataset':<11} {'system':<18} {'RG':>6} {'PP+':>5}")
    for ds, system, *vals in ROWS:
        inp = EvalInputs(*vals)
        print(f"{ds:<11} {system:<18} {relative_gain(inp):6.2f} {pp_plus(inp.U_r, inp.MG_u):5d}")


if __name__ == "__main__":
    main()
