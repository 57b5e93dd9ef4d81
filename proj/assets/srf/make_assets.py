"""Regenerates the shipped sensor response CSVs.

Each band is modelled as a smooth flat-topped pass band (a 6th-order
super-Gaussian) whose full width at half maximum spans the band edges
published in the sensor data sheets. Responses are sampled every 5 nm and
peak-normalized to 1.
"""

import math
from pathlib import Path

IKONOS = [
    ("blue", 445, 516),
    ("green", 506, 595),
    ("red", 632, 698),
    ("nir", 757, 853),
]

WORLDVIEW2 = [
    ("coastal", 400, 450),
    ("blue", 450, 510),
    ("green", 510, 580),
    ("yellow", 585, 625),
    ("red", 630, 690),
    ("red_edge", 705, 745),
    ("nir1", 770, 895),
    ("nir2", 860, 1040),
]

WORLDVIEW3_SWIR = [
    ("swir1", 1195, 1225),
    ("swir2", 1550, 1590),
    ("swir3", 1640, 1680),
    ("swir4", 1710, 1750),
    ("swir5", 2145, 2185),
    ("swir6", 2185, 2225),
    ("swir7", 2235, 2285),
    ("swir8", 2295, 2365),
]

SENSORS = {
    "ikonos-3": (IKONOS[:3], 350, 1100),
    "ikonos-4": (IKONOS, 350, 1100),
    "worldview2-8": (WORLDVIEW2, 350, 1100),
    "worldview3-16": (WORLDVIEW2 + WORLDVIEW3_SWIR, 350, 2500),
}


def response(wl, lo, hi, order=6):
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    r = math.exp(-math.log(2.0) * abs((wl - center) / half) ** order)
    return 0.0 if r < 1e-4 else r


def main():
    out_dir = Path(__file__).resolve().parent
    for sensor, (bands, start, stop) in SENSORS.items():
        lines = ["wavelength_nm," + ",".join(name for name, _, _ in bands)]
        for wl in range(start, stop + 1, 5):
            values = [response(wl, lo, hi) for _, lo, hi in bands]
            lines.append(f"{wl}," + ",".join(f"{v:.6f}" for v in values))
        (out_dir / f"{sensor}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
