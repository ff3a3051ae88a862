"""Regenerates the bundled five-site scenario pack.

Every file in this directory except this script and README.md is produced
here from a fixed seed, so the pack can be rebuilt byte for byte:

    python3 data/pack/generate_pack.py

Price histories are synthetic: a calendar trend plus weakly autocorrelated
noise pushed through a bounded mixture marginal (a bulk body and a spike
plateau). Fuel retail tracks are back-solved so that the refinery-gate means
land on the regional targets below.
"""

import json
from pathlib import Path

import numpy as np
from scipy.signal import lfilter
from scipy.stats import beta, norm

ROOT = Path(__file__).resolve().parent
SEED = 20230817
START = np.datetime64("2013-01-01T00:00")
HOURS = 87648  # 2013-01-01 .. 2022-12-31

# Marginal mixture per site: (weight, low, high, beta_a, beta_b), stacked in
# quantile order. The trend amplitudes are yearly, daily, weekly.
PRICE_DESIGN = {
    "braidwood": dict(
        trend=(5, 4, 2),
        comps=[(0.03, -80, 5, 0.4, 2), (0.90, 14, 56, 1.3, 4), (0.07, 85, 280, 1, 2)],
    ),
    "davis_besse": dict(
        trend=(5, 4, 2),
        comps=[(0.03, -80, 5, 0.4, 2), (0.92, 14, 56, 1.3, 4), (0.05, 80, 240, 1, 2)],
    ),
    "cooper": dict(
        trend=(4, 5, 2),
        comps=[(0.02, -60, -2, 0.4, 2), (0.88, 4, 44, 1.5, 4), (0.10, 48, 130, 1, 2)],
    ),
    "prairie_island": dict(
        trend=(3, 3, 1),
        comps=[(0.03, -40, -6, 0.4, 2), (0.37, -6, 4, 2, 2), (0.52, 4, 55, 1.1, 3.5), (0.08, 55, 90, 1, 1.5)],
    ),
    "south_texas": dict(
        trend=(8, 6, 2),
        comps=[(0.02, -70, 10, 0.4, 2), (0.93, 16, 58, 1.3, 4), (0.05, 70, 200, 1, 1.5)],
    ),
}
NOISE_AR, NOISE_MA = 0.2, 0.1

SITES = {
    "braidwood": dict(
        name="Braidwood", npp_capacity_mwe=1194.0, market="PJM", state="IL", state_tax_rate=0.095,
        fuel_region="enc_il", station_capacity_mwe=2354.0, station_units=2,
        capacity_payment_usd_per_mw_yr=55000.0,
    ),
    "cooper": dict(
        name="Cooper", npp_capacity_mwe=769.0, market="SPP", state="NE", state_tax_rate=0.0725,
        fuel_region="wnc_ne", station_capacity_mwe=769.0, station_units=1,
        capacity_payment_usd_per_mw_yr=55000.0,
    ),
    "davis_besse": dict(
        name="Davis-Besse", npp_capacity_mwe=894.0, market="PJM", state="OH", state_tax_rate=0.0,
        fuel_region="enc_oh", station_capacity_mwe=894.0, station_units=1,
        capacity_payment_usd_per_mw_yr=55000.0,
    ),
    "prairie_island": dict(
        name="Prairie Island", npp_capacity_mwe=522.0, market="MISO", state="MN", state_tax_rate=0.098,
        fuel_region="wnc_mn", station_capacity_mwe=1041.0, station_units=2,
        capacity_payment_usd_per_mw_yr=55000.0,
    ),
    "south_texas": dict(
        name="South Texas Project", npp_capacity_mwe=1280.0, market="ERCOT", state="TX", state_tax_rate=0.0,
        fuel_region="wsc", station_capacity_mwe=1280.0, station_units=1,
        capacity_payment_usd_per_mw_yr=55000.0,
    ),
}

# Refinery-gate means, $/gal, over 2022-2050.
GATE_TARGETS = {
    "wnc_ne": dict(naphtha=0.75, diesel=1.83, jet=1.93),
    "wnc_mn": dict(naphtha=1.08, diesel=1.80, jet=1.80),
    "wsc": dict(naphtha=0.71, diesel=1.99, jet=2.00),
    "enc_oh": dict(naphtha=1.15, diesel=1.79, jet=1.88),
    "enc_il": dict(naphtha=0.82, diesel=1.55, jet=1.85),
}
REGION_STATE = {"wnc_ne": "NE", "wnc_mn": "MN", "wsc": "TX", "enc_oh": "OH", "enc_il": "IL"}
FUEL_YEARS = np.arange(2022, 2051)

TAXES = {  # state+federal $/gal: diesel, jet, gasoline
    "IL": (0.952, 0.219, 0.817),
    "MN": (0.530, 0.369, 0.470),
    "OH": (0.714, 0.219, 0.569),
    "TX": (0.444, 0.219, 0.384),
    "NE": (0.495, 0.249, 0.441),
}
NAPHTHA_DISTRIBUTION = {"IL": 0.36, "MN": 0.03, "OH": 0.03, "TX": 0.03, "NE": 0.03}
DIESEL_PCT, GASOLINE_PCT = 0.202, 0.156
NAPHTHA_TAX, MARKETING, JET_PIPELINE = 0.136, 0.06, 0.12

CAPTURE_COSTS = {  # kind: (capture $/t, compression $/t)
    "bioethanol": (0.0, 14.0),
    "ammonia": (0.0, 14.0),
    "natural_gas": (0.0, 14.0),
    "hydrogen": (45.0, 14.0),
    "coal": (60.0, 14.0),
    "iron_steel": (55.0, 14.0),
    "cement": (58.0, 14.0),
}
CONCENTRATION = {
    "bioethanol": (99.8, 99.8),
    "ammonia": (97.1, 97.1),
    "natural_gas": (99.0, 99.0),
    "hydrogen": (44.5, 44.5),
    "coal": (11.0, 14.0),
    "iron_steel": (23.2, 26.4),
    "cement": (22.4, 22.4),
}
# Site registries: kind weights, a distance scale and a minimum distance, km.
CO2_DESIGN = {
    "braidwood": dict(n=40, scale=150.0, offset=200.0, kinds=dict(bioethanol=4, ammonia=2, natural_gas=1, coal=3, hydrogen=1, iron_steel=2, cement=2)),
    "cooper": dict(n=36, scale=260.0, offset=360.0, kinds=dict(bioethanol=4, ammonia=1, natural_gas=1, coal=3, hydrogen=1, iron_steel=1, cement=2)),
    "davis_besse": dict(n=38, scale=220.0, offset=250.0, kinds=dict(bioethanol=2, ammonia=1, natural_gas=1, coal=4, hydrogen=1, iron_steel=3, cement=2)),
    "prairie_island": dict(n=34, scale=330.0, offset=380.0, kinds=dict(bioethanol=3, ammonia=1, natural_gas=1, coal=3, hydrogen=1, iron_steel=1, cement=2)),
    "south_texas": dict(n=40, scale=380.0, offset=270.0, kinds=dict(bioethanol=1, ammonia=2, natural_gas=2, coal=3, hydrogen=3, iron_steel=1, cement=2)),
}
# Pipeline surrogate used to produce the reference table: a*d*Q^-beta + b*d + c.
TRANSPORT_TRUTH = dict(a=60.0, beta=0.4, b=0.005, c=1.5)

NAPHTHA_RATIO_TRUE = 0.86


def harmonics(t, period, weights, phase):
    return sum(w * np.cos(2 * np.pi * j * (t - phase) / period) for j, w in enumerate(weights, start=1))


def mixture_quantile(u, comps):
    assert abs(sum(c[0] for c in comps) - 1.0) < 1e-9, comps
    out = np.empty_like(u)
    lo_u = 0.0
    for w, lo, hi, a, b in comps:
        mask = (u >= lo_u) & (u < lo_u + w)
        v = np.clip((u[mask] - lo_u) / w, 1e-12, 1 - 1e-12)
        out[mask] = lo + (hi - lo) * beta.ppf(v, a, b)
        lo_u += w
    return out


def price_history(rng, design):
    t = np.arange(HOURS)
    shocks = rng.standard_normal(HOURS + 1000)
    z = lfilter([1, NOISE_MA], [1, -NOISE_AR], shocks)[1000:]
    z /= np.sqrt((1 + 2 * NOISE_AR * NOISE_MA + NOISE_MA**2) / (1 - NOISE_AR**2))
    ay, ad, aw = design["trend"]
    trend = (
        ay * harmonics(t, 8760, (1, 0.5, 0.2), 4000)
        + ad * harmonics(t, 24, (1, 0.5, 0.2), 18)
        + aw * harmonics(t, 168, (1, 0.3, 0.1), 120)
    )
    return trend + mixture_quantile(norm.cdf(z), design["comps"])


def write_prices(rng):
    out = ROOT / "prices"
    out.mkdir(exist_ok=True)
    stamps = START + np.arange(HOURS).astype("timedelta64[h]")
    for site, design in PRICE_DESIGN.items():
        prices = price_history(rng, design)
        with open(out / f"{site}.csv", "w") as f:
            f.write("timestamp,price_usd_per_mwh\n")
            for ts, p in zip(stamps, prices):
                f.write(f"{ts}:00Z,{p:.2f}\n")


def write_co2(rng):
    out = ROOT / "co2"
    out.mkdir(exist_ok=True)
    with open(out / "capture_costs.csv", "w") as f:
        f.write("kind,capture_usd_per_t,compression_usd_per_t\n")
        for kind, (cap, comp) in CAPTURE_COSTS.items():
            f.write(f"{kind},{cap:.2f},{comp:.2f}\n")

    tr = TRANSPORT_TRUTH
    with open(out / "transport_reference.csv", "w") as f:
        f.write("distance_km,flow_tpy,cost_usd_per_t\n")
        for d in (25, 50, 100, 200, 400):
            for q in (1e5, 3e5, 1e6, 3e6):
                cost = tr["a"] * d * q ** -tr["beta"] + tr["b"] * d + tr["c"]
                cost *= 1 + rng.normal(0, 0.03)
                f.write(f"{d},{q:.0f},{cost:.3f}\n")

    for site, design in CO2_DESIGN.items():
        kinds = list(design["kinds"])
        weights = np.array([design["kinds"][k] for k in kinds], dtype=float)
        weights /= weights.sum()
        with open(out / f"{site}_sources.csv", "w") as f:
            f.write("id,kind,capacity_tpy,concentration_pct,distance_km\n")
            for i in range(design["n"]):
                kind = kinds[rng.choice(len(kinds), p=weights)]
                lo, hi = CONCENTRATION[kind]
                conc = rng.uniform(lo, hi)
                if kind == "coal":
                    cap = rng.lognormal(np.log(1.5e6), 0.5)
                elif kind in ("bioethanol", "ammonia"):
                    cap = rng.lognormal(np.log(2.5e5), 0.5)
                else:
                    cap = rng.lognormal(np.log(6e5), 0.6)
                dist = design["scale"] * rng.gamma(2.0, 0.5) + design["offset"]
                f.write(f"{site[:2].upper()}{i:03d},{kind},{cap:.0f},{conc:.1f},{dist:.1f}\n")


def fuel_shape(rng):
    k = np.arange(FUEL_YEARS.size)
    shape = 1 + 0.006 * (k - k.mean()) + 0.03 * np.sin(k / 3.0) + rng.normal(0, 0.01, k.size)
    return shape / shape.mean()


def write_fuel(rng):
    out = ROOT / "fuel"
    out.mkdir(exist_ok=True)

    # Historical naphtha/gasoline pairs ($/gal); the ratio fitted here is the
    # one the engine recovers, so the back-solve below uses it.
    months = np.arange(np.datetime64("2012-01"), np.datetime64("2022-01"))
    gasoline = 2.6 + 0.5 * np.sin(np.arange(months.size) / 9.0) + rng.normal(0, 0.12, months.size)
    naphtha = NAPHTHA_RATIO_TRUE * gasoline + rng.normal(0, 0.06, months.size)
    gasoline, naphtha = np.round(gasoline, 3), np.round(naphtha, 3)
    with open(out / "naphtha_gasoline_history.csv", "w") as f:
        f.write("date,naphtha_usd_per_gal,gasoline_usd_per_gal\n")
        for m, n_, g in zip(months, naphtha, gasoline):
            f.write(f"{m}-01,{n_:.3f},{g:.3f}\n")
    ratio = float(np.dot(naphtha, gasoline) / np.dot(gasoline, gasoline))

    with open(out / "adjustments.csv", "w") as f:
        f.write("state,fuel,tax_usd_per_gal,pct_of_retail,marketing_usd_per_gal,distribution_usd_per_gal\n")
        for state, (d_tax, j_tax, g_tax) in TAXES.items():
            f.write(f"{state},diesel,{d_tax},{DIESEL_PCT},0,0\n")
            f.write(f"{state},jet,{j_tax},0,{MARKETING},{JET_PIPELINE}\n")
            f.write(f"{state},gasoline,{g_tax},{GASOLINE_PCT},0,0\n")
            f.write(f"{state},naphtha,{NAPHTHA_TAX},{GASOLINE_PCT},{MARKETING},{NAPHTHA_DISTRIBUTION[state]}\n")

    for region, target in GATE_TARGETS.items():
        state = REGION_STATE[region]
        d_tax, j_tax, _ = TAXES[state]
        diesel_mean = (target["diesel"] + d_tax) / (1 - DIESEL_PCT)
        jet_mean = target["jet"] + j_tax + MARKETING + JET_PIPELINE
        naphtha_retail = (target["naphtha"] + NAPHTHA_TAX + MARKETING + NAPHTHA_DISTRIBUTION[state]) / (
            1 - GASOLINE_PCT
        )
        gasoline_mean = naphtha_retail / ratio
        with open(out / f"retail_prices_{region}.csv", "w") as f:
            f.write("year,fuel,usd_per_gal\n")
            for fuel, mean in (("diesel", diesel_mean), ("jet", jet_mean), ("gasoline", gasoline_mean)):
                for year, s in zip(FUEL_YEARS, fuel_shape(rng)):
                    f.write(f"{year},{fuel},{mean * s:.4f}\n")


def write_configs():
    out = ROOT / "scenarios"
    out.mkdir(exist_ok=True)
    for site, params in SITES.items():
        region = params["fuel_region"]
        config = {
            "site": params,
            "techno": {"effective_elec_spec_override": 39.795},
            "finance": {},
            "data": {
                "price_history": f"../prices/{site}.csv",
                "co2_sources": f"../co2/{site}_sources.csv",
                "capture_costs": "../co2/capture_costs.csv",
                "transport_references": "../co2/transport_reference.csv",
                "retail_prices": f"../fuel/retail_prices_{region}.csv",
                "adjustments": "../fuel/adjustments.csv",
                "naphtha_history": "../fuel/naphtha_gasoline_history.csv",
            },
            "study": {"realizations": 20, "base_seed": SEED, "sweep_points": 5, "first_operating_year": 2026},
        }
        with open(out / f"{site}.json", "w") as f:
            json.dump(config, f, indent=2)
            f.write("\n")
        if site == "davis_besse":
            # No synfuel plant at all: the IES reduces to the grid-only baseline.
            zero = json.loads(json.dumps(config))
            zero["study"]["configuration"] = {"htse_mwe": 0.0, "ft_kg_per_h": 0.0, "storage_kg": 0.0}
            with open(out / "zero_capacity.json", "w") as f:
                json.dump(zero, f, indent=2)
                f.write("\n")


def main():
    rng = np.random.default_rng(SEED)
    write_prices(rng)
    write_co2(rng)
    write_fuel(rng)
    write_configs()


if __name__ == "__main__":
    main()
