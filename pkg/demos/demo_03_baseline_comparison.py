"""
Offloading every function versus offloading mining only
=======================================================

Compares the full offload against the reference design in which devices run
everything except mining. Which one uses less energy depends on the device
power assumption: a server spends 125 W / 5 GHz = 25 nJ per cycle, while the
default devices spend 10 nJ per cycle (1 W at 0.1 GHz, 0.1 W at 0.01 GHz).
"""

from dataclasses import replace

from bfv import default_instance, evaluate_baseline, solve_point

inst = default_instance()


def show(label, instance):
    bfv = solve_point(instance).report
    base = evaluate_baseline(instance)
    print(f"\n{label}")
    print(f"  {'':10s}{'E_total':>10s}{'E_RAN':>9s}{'E_MEC':>9s}{'E_local':>9s}{'latency':>9s}{'rate':>9s}")
    for name, r in (("offload", bfv), ("baseline", base)):
        print(f"  {name:10s}{r.e_total_j:10.1f}{r.e_ran_j:9.2f}{r.e_mec_j:9.1f}{r.e_local_j:9.1f}"
              f"{r.latency_s:9.2f}{r.confirmation_rate_tps:9.0f}")


show("default device power (assumption: mobile 1 W, IoT 0.1 W)", inst)

###############################################################################
# Devices that burn more energy per cycle than a server flip the energy
# ordering. Here every device draws 3x the default.
hungry = replace(inst, users=tuple(replace(u, local_power_w=3 * u.local_power_w) for u in inst.users))
show("device power x3", hungry)

###############################################################################
# Latency is a different story: local execution on 0.01-0.1 GHz devices takes
# tens of seconds, so the baseline's confirmation rate is far lower either way.
