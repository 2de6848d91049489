"""The same learners on an acrobot and a thrust-limited rocket ascent.

Acrobot: four state variables binned 4x4x4x4, the two link angles grouped into
the rows and the two velocities into the columns (16x16 table). Rocket: height
and velocity in the rows, remaining mass in the columns; the return is the
height reached once the fuel is spent. One seed each; the acrobot run is shortened.
"""

from pathlib import Path

from lrpg.harness import parse_config, run_experiment, tail_mean

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

for name, episodes in (("acrobot", 300), ("goddard", 1000)):
    cfg = parse_config(CONFIGS / f"{name}.conf")
    cfg.seeds = [0]
    cfg.hyper.episodes = episodes
    results = run_experiment(cfg)
    print(f"{name}: {cfg.grid.rows}x{cfg.grid.cols} grid")
    for alg, runs in results.items():
        r = runs[0]
        first = r.returns[:50].mean()
        print(f"  {alg}: {r.params:5d} params, first 50 episodes {first:9.3f}, last 100 {tail_mean(r.returns):9.3f}")
