"""Hour-boundary rescheduling keeps the grid excited; measure average error.

Runs the ``rescheduling`` preset (800 s) and prints the window-averaged
relative error together with the frequency replay comparison.
"""

from dreminertia.scenarios import preset, run_pipeline

cfg = preset("rescheduling")
print(f"{len(cfg.events)} scheduled events over {cfg.duration:.0f} s")
result = run_pipeline(cfg)
r = result.report
print(f"e_avg over {cfg.window} s = {r.e_avg:.4f}")
print(f"final relative error eta1 {r.final_rel_err[0]:.3%}, eta2 {r.final_rel_err[1]:.3%}")
print(f"replay max |df|: nominal H {r.delta_f_max[0]:.2f} mHz, "
      f"estimated H {r.delta_f_max[1]:.2f} mHz")
print(f"pipeline runtime {r.runtime:.1f} s")
