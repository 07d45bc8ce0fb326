"""Link budget of the sliced-LED transmitter and the classical receiver.

Walks from the emitter's power at the drive current, through spectral
slicing and transmitter loss, to the mean photon number per symbol, then
looks at how much room the emitter leaves for a larger mean photon number.
Run:  python3 demos/01_link_budget.py
"""
from dataclasses import replace
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from coexqkd import PowerLevel, SystemModel, calibrate_all
from coexqkd import detection, emitter, experiments

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)

# %% the emitter and the slice that carries the quantum signal
system = SystemModel()
e = system.emitter
p_led = emitter.output_power(e, system.drive_current_ma)
print(f"LED output at {system.drive_current_ma:g} mA: {p_led.dbm:.2f} dBm")
print(f"slicing filter passband: {system.tx.slicing_filter.passband_nm:.4f} nm "
      f"around {system.tx.wavelength.nm:.2f} nm")

# %% the transmitter loss that produces the target mean photon number
cal = calibrate_all(system)
mu = experiments.transmitted_mu(system, cal)
print(f"fitted transmitter loss {cal.tx_loss_db:.3f} dB -> mu = {mu:.4f}")
print(f"equivalent optical power at the modulator output: "
      f"{emitter.mu_to_power(mu, system.tx.wavelength, system.symbol_rate_baud).dbm:.2f} dBm")

# %% headroom: how far mu can be raised by removing transmitter loss
for target in (0.05, 0.1):
    print(f"mu {target:g} needs {emitter.mu_headroom_db(mu, target):.2f} dB more than today")
try:
    emitter.calibrate_tx_loss(e, system.tx, 0.1, system.drive_current_ma)
except Exception as exc:  # the emitter is too weak for this
    print(f"mu 0.1 at zero loss: {exc}")

# %% drive current sweep: mu scales with the LED's VLI curve
currents = np.linspace(1.0, 20.0, 40)
tx = replace(system.tx, modulator_insertion_loss_db=cal.tx_loss_db)
mus = [emitter.mu_at_modulator_output(e, tx, i) for i in currents]

# %% classical receiver BER against received power
rops = np.linspace(-34.0, -26.0, 161)
rx = replace(system.rx, noise_current_rms_a=cal.rx_noise_current_a)
ber = detection.classical_ber_dbm(rx, rops)
print(f"BER at -29.9 dBm: {detection.classical_ber(rx, PowerLevel.from_dbm(-29.9)):.2e}")

fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
a.plot(currents, mus)
a.set_xlabel("drive current [mA]")
a.set_ylabel("mean photons / symbol")
b.semilogy(rops, ber)
b.axhline(1e-10, ls=":", color="k")
b.set_xlabel("classical ROP [dBm]")
b.set_ylabel("BER")
fig.tight_layout()
fig.savefig(OUT / "link_budget.png")
print(f"figure: {OUT / 'link_budget.png'}")
