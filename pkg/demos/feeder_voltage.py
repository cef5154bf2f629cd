"""Push a day of load through the default rural feeder and count voltage problems.

The synthetic series is in MW for a whole region; ``kw_per_mw`` maps it onto
the feeder (here 1 MW of regional load becomes 0.6 kW of feeder load, which puts
the daily swing across the 0.95 pu limit).

    python demos/feeder_voltage.py
"""

from loadcast import GeneratorConfig, ImpactSettings, build_kerber_feeder, generate_profile, impact_report
from loadcast.gridimpact import allocate, run_power_flow, uniform_allocation

net = build_kerber_feeder()
settings = ImpactSettings(kw_per_mw=0.6)
print(f"feeder: {net.n_buses} buses, {len(net.lines)} overhead spans")

day = generate_profile(GeneratorConfig(start="2023-07-15T00:00:00", end="2023-07-16T00:00:00", seed=1))
for hour in (3, 13, 19):
    flow = run_power_flow(net, allocate(day.values[hour], uniform_allocation(net), settings))
    print(f"{hour:02d}:00  load {day.values[hour] * settings.kw_per_mw:6.1f} kW  min voltage {flow.min_voltage:.4f} pu  "
          f"losses {flow.losses_kw:.2f} kW")

# a forecast that runs 10 % low misses hours where the real voltage dips under the limit
for label, factor in (("10% low", 0.9), ("10% high", 1.1)):
    report = impact_report(net, day, factor * day.values, settings=settings)
    print(label, report.summary())
