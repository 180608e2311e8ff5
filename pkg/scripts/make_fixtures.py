"""Regenerate the synthetic datasets in ``data/``.

All series come from the daily model, so calibration on them is an exact
round trip (up to the 10 significant digits written to disk).
"""
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from svir_control.calibration import simulate_discrete, write_series_csv

DATA = Path(__file__).resolve().parent.parent / "data"
BASELINE_THETA = (0.22, 0.004, 0.071, 0.095)  # beta, alpha, gamma1, gamma
BETA0 = 0.22


def main():
    DATA.mkdir(exist_ok=True)
    x0 = (0.85, 0.0, 0.15, 0.0)

    write_series_csv(simulate_discrete(BASELINE_THETA, x0, 60, eps=0.078), DATA / "svir_baseline.csv")

    sir_x0 = (0.99, 0.0, 0.01, 0.0)
    steps = np.where(np.arange(59) < 20, 0.3, np.where(np.arange(59) < 40, 0.15, 0.22))
    write_series_csv(simulate_discrete((0.3, 0.0, 0.0, 0.1), sir_x0, 60, beta_path=steps),
                     DATA / "sir_stepped_beta.csv")

    u = np.where(np.arange(79) < 30, 0.0, 0.6)
    write_series_csv(simulate_discrete((BETA0, 0.0, 0.0, 0.095), sir_x0, 80,
                                       beta_path=BETA0 * (1 - u)),
                     DATA / "sir_control_step.csv")

    write_series_csv(simulate_discrete((BETA0, 0.0, 0.0, 0.095), sir_x0, 60),
                     DATA / "sir_constant_beta.csv")

    # counts on a national scale: early growth, a strict phase, then a partial relaxation
    pop = 60_360_000
    n = 120
    days = np.arange(n - 1)
    u = np.select([days < 21, days < 70], [0.0, 0.7], 0.4)
    s = simulate_discrete((0.30, 0.0, 0.0, 0.08), (1 - 2e-6, 0.0, 2e-6, 0.0), n,
                          beta_path=0.30 * (1 - u))
    start = date(2020, 2, 24)
    with (DATA / "national_snapshot.csv").open("w", encoding="utf-8") as fh:
        fh.write("date,S_count,V_count,I_count,R_count\n")
        for k in range(n):
            counts = np.rint(np.array([s.S[k], s.V[k], s.I[k], s.R[k]]) * pop).astype(int)
            fh.write(f"{start + timedelta(days=k)},{','.join(map(str, counts))}\n")
    with (DATA / "national_phases.csv").open("w", encoding="utf-8") as fh:
        fh.write("start,end,label\n")
        fh.write("2020-02-24,2020-03-15,early growth\n")
        fh.write("2020-03-16,2020-05-03,strict distancing\n")
        fh.write("2020-05-04,2020-06-22,partial reopening\n")


if __name__ == "__main__":
    main()
