"""Quick end-to-end check of the holeburn_py extension module."""

import math

import holeburn_py as hb


def main():
    model = hb.TrapModel.tabulated()
    peak = model.beam(200e-6)["peak_intensity"]
    assert abs(hb.ionization_rate(peak, model.sigma_ion, 371e-9) / 3e4 - 1) < 1e-9

    times = [0.0, 5.0, 50.0, 200.0]
    s = hb.simulate_signal(times, 20e-6, n_r=16, n_z=16, n_delta=16)
    assert all(a > b for a, b in zip(s, s[1:])), s
    counts = hb.scaled_signal(s, 0.19, 9.4e7, 20e-6)
    print("S(t)/S(0):", [round(c / counts[0], 3) for c in counts])

    fields = hb.resonance_fields(44.5e6)
    assert abs(fields["sum"][0] - 1e-3) < 1e-12
    print("B_sum at 44.5 MHz (total, applied):", fields["sum"])

    scan = hb.gen_hole_scan(seed=1)
    treated = hb.treat_scan(scan["freq"], scan["fluor_counts"], scan["power_counts"], scan["aom_off"])
    keep = [i for i, v in enumerate(treated["signal"]) if not math.isnan(v)]
    fit = hb.fit_hole([treated["freq"][i] for i in keep], [treated["signal"][i] for i in keep])
    fwhm = fit["fwhm"]["value"]
    assert abs(fwhm / 6e6 - 1) < 0.2, fwhm
    print(f"hole FWHM {fwhm / 1e6:.2f} MHz, homogeneous linewidth {fit['hom_linewidth'] / 1e6:.2f} MHz")

    waits = [0.02 * i for i in range(26)]
    values = [math.exp(-t / 0.072) + 0.1 for t in waits]
    tau = hb.fit_exponential(waits, values)["tau"]["value"]
    assert abs(tau / 0.072 - 1) < 1e-6

    try:
        hb.fit_linear([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    except ValueError:
        pass
    else:
        raise AssertionError("degenerate x should raise")

    print("smoke test passed")


if __name__ == "__main__":
    main()
