"""Fixed input versus input folded into the state: final tube diameter on the cardiac model."""

from reachverify import builtin_problem, closed_model_comparison


def main():
    pb = builtin_problem("cardiac")
    for delta in (0.1, 0.01, 0.001):
        cmp = closed_model_comparison(pb, delta)
        print(cmp.report())
        print()


if __name__ == "__main__":
    main()
