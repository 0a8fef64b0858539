"""Write the bundled benchmark networks as JSON fixtures.

The parameter tables below are transcriptions of the standard repository
versions of these networks (cancer, earthquake, asia, survey).  Larger
repository networks (sachs, alarm, ...) have machine-learned CPTs and are
not transcribed here; convert them from BIF with scripts/convert_bif.py.

Usage: python scripts/build_networks.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from drskel.bayesnet import DiscreteBayesNet, save_network


def cancer() -> DiscreteBayesNet:
    # Categories: Pollution (low, high); Smoker/Cancer/Dyspnoea (True, False);
    # Xray (positive, negative).
    return DiscreteBayesNet(
        names=("Pollution", "Smoker", "Cancer", "Xray", "Dyspnoea"),
        cards=(2, 2, 2, 2, 2),
        parents=((), (), (0, 1), (2,), (2,)),
        cpts=(
            np.array([[0.9, 0.1]]),
            np.array([[0.3, 0.7]]),
            # rows: (low,True), (low,False), (high,True), (high,False)
            np.array(
                [
                    [0.03, 0.97],
                    [0.001, 0.999],
                    [0.05, 0.95],
                    [0.02, 0.98],
                ]
            ),
            np.array([[0.9, 0.1], [0.2, 0.8]]),
            np.array([[0.65, 0.35], [0.3, 0.7]]),
        ),
    )


def earthquake() -> DiscreteBayesNet:
    # All nodes (True, False).
    return DiscreteBayesNet(
        names=("Burglary", "Earthquake", "Alarm", "JohnCalls", "MaryCalls"),
        cards=(2, 2, 2, 2, 2),
        parents=((), (), (0, 1), (2,), (2,)),
        cpts=(
            np.array([[0.01, 0.99]]),
            np.array([[0.02, 0.98]]),
            # rows: (T,T), (T,F), (F,T), (F,F)
            np.array(
                [
                    [0.95, 0.05],
                    [0.94, 0.06],
                    [0.29, 0.71],
                    [0.001, 0.999],
                ]
            ),
            np.array([[0.9, 0.1], [0.05, 0.95]]),
            np.array([[0.7, 0.3], [0.01, 0.99]]),
        ),
    )


def asia() -> DiscreteBayesNet:
    # All nodes (yes, no).
    return DiscreteBayesNet(
        names=("asia", "tub", "smoke", "lung", "bronc", "either", "xray", "dysp"),
        cards=(2, 2, 2, 2, 2, 2, 2, 2),
        parents=(
            (),      # asia
            (0,),    # tub | asia
            (),      # smoke
            (2,),    # lung | smoke
            (2,),    # bronc | smoke
            (3, 1),  # either | lung, tub
            (5,),    # xray | either
            (4, 5),  # dysp | bronc, either
        ),
        cpts=(
            np.array([[0.01, 0.99]]),
            np.array([[0.05, 0.95], [0.01, 0.99]]),
            np.array([[0.5, 0.5]]),
            np.array([[0.1, 0.9], [0.01, 0.99]]),
            np.array([[0.6, 0.4], [0.3, 0.7]]),
            # logical OR of (lung, tub); rows (y,y), (y,n), (n,y), (n,n)
            np.array(
                [
                    [1.0, 0.0],
                    [1.0, 0.0],
                    [1.0, 0.0],
                    [0.0, 1.0],
                ]
            ),
            np.array([[0.98, 0.02], [0.05, 0.95]]),
            # rows: (bronc=y, either=y), (y,n), (n,y), (n,n)
            np.array(
                [
                    [0.9, 0.1],
                    [0.8, 0.2],
                    [0.7, 0.3],
                    [0.1, 0.9],
                ]
            ),
        ),
    )


def survey() -> DiscreteBayesNet:
    # A (young, adult, old); S (M, F); E (high, uni); O (emp, self);
    # R (small, big); T (car, train, other).
    return DiscreteBayesNet(
        names=("A", "S", "E", "O", "R", "T"),
        cards=(3, 2, 2, 2, 2, 3),
        parents=((), (), (0, 1), (2,), (2,), (3, 4)),
        cpts=(
            np.array([[0.3, 0.5, 0.2]]),
            np.array([[0.6, 0.4]]),
            # rows: (young,M), (young,F), (adult,M), (adult,F), (old,M), (old,F)
            np.array(
                [
                    [0.75, 0.25],
                    [0.64, 0.36],
                    [0.72, 0.28],
                    [0.70, 0.30],
                    [0.88, 0.12],
                    [0.90, 0.10],
                ]
            ),
            np.array([[0.96, 0.04], [0.92, 0.08]]),
            np.array([[0.25, 0.75], [0.20, 0.80]]),
            # rows: (emp,small), (emp,big), (self,small), (self,big)
            np.array(
                [
                    [0.48, 0.42, 0.10],
                    [0.58, 0.24, 0.18],
                    [0.56, 0.36, 0.08],
                    [0.70, 0.21, 0.09],
                ]
            ),
        ),
    )


def main():
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parents[1] / "src" / "drskel" / "networks"
    )
    outdir.mkdir(parents=True, exist_ok=True)
    for name, builder in [
        ("cancer", cancer),
        ("earthquake", earthquake),
        ("asia", asia),
        ("survey", survey),
    ]:
        save_network(builder(), outdir / f"{name}.json")
        print(f"wrote {outdir / (name + '.json')}")


if __name__ == "__main__":
    main()
