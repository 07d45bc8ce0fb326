"""Co-existence with a classical channel: the safe operating area.

Sweeps the classical received power with and without the 1 km fibre.  The
classical link needs enough power for BER 1e-10; the quantum link needs
little enough crosstalk to stay below 11 % QBER.  The window between the two
is the safe operating area (SOAX).
Run:  python3 demos/03_coexistence.py
"""
from dataclasses import replace
from pathlib import Path

from coexqkd import BACK_TO_BACK, FIBER, SystemModel, calibrate_all, compute_soax, rop_grid
from coexqkd import experiments
from coexqkd.cli import plot_sweep
from coexqkd.detection import SpadSpec

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)

system = SystemModel()
cal = calibrate_all(system)
grid = rop_grid()

# %% back-to-back versus fibre
for mode in (BACK_TO_BACK, FIBER):
    table = experiments.run_coexistence_sweep(system, cal, grid, mode)
    plot_sweep(table, OUT / f"sweep_{mode}.png")
    soax = compute_soax(table)
    print(f"[{mode}]")
    print("  " + soax.summary().replace("\n", "\n  "))

# %% where the noise comes from at the fibre crossing
op = experiments.operating_point(system, cal, -28.4, FIBER)
print(f"at -28.4 dBm: leakage {op.leakage_photon_rate:.3g} ph/s, Raman {op.raman_photon_rate:.3g} ph/s")

# %% what-ifs: a better receiver widens the window, more Raman closes it
better_rx = replace(system, anchors=replace(system.anchors, sensitivity_dbm=-32.0))
table = experiments.run_coexistence_sweep(better_rx, calibrate_all(better_rx), grid, FIBER)
print(f"receiver sensitivity -32 dBm: width {compute_soax(table).width:.2f} dB")

raman10 = replace(cal, raman_beta=10 * cal.raman_beta)
table = experiments.run_coexistence_sweep(system, raman10, grid, FIBER)
print(f"10x Raman: {'empty' if compute_soax(table).empty else 'open'} window")

quiet = replace(system, spad=SpadSpec(system.spad.efficiency, system.spad.dead_time_s, 50.0))
table = experiments.run_coexistence_sweep(quiet, cal, grid, FIBER)
print(f"50 cts/s dark rate with today's calibration: width {compute_soax(table).width:.2f} dB")
