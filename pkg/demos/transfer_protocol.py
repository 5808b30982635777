"""Miniature run of the full transfer protocol.

Executes the scenario chain with toy budgets so it finishes in about a
minute: train a small policy on embodiment A, evaluate it on A's fixed
start grid, evaluate the same checkpoint zero-shot on embodiment B, then
fine-tune it on B and evaluate again. Budgets this small do not produce a
competent policy; the point is to show the artifacts and the comparison
wiring, not performance. The real budgets live in the defaults.
"""

import tempfile
from pathlib import Path

from pegx import config, harness


def main():
    overrides = {
        "sac.actor_hidden": "16,16",
        "sac.critic_hidden": "32,32",
        "sac.batch_size": "32",
        "sac.buffer_capacity": "4000",
        "sac.warmup_steps": "80",
        "scenario.train_steps_a": "600",
        "scenario.train_steps_b": "600",
        "scenario.finetune_steps": "300",
        "scenario.finetune_warmup_steps": "50",
        "scenario.eval_episodes": "16",
        "sac.curve_every": "200",
    }
    settings = config.settings_from_config(config.load_config(overrides=overrides))

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        for scenario_id in (1, 3, 5):
            spec = harness.SCENARIOS[scenario_id]
            stats, records, _ = harness.run_scenario(
                scenario_id, settings, base_seed=42, ckpt_dir=out
            )
            print(f"scenario {scenario_id} ({spec.mode}, evaluated on {spec.eval_embodiment}):")
            print(f"  success rate {stats.success_rate_percent:6.1f}%   "
                  f"avg steps {stats.avg_steps:5.1f}   episodes {stats.episodes}")
        produced = sorted(p.name for p in out.iterdir())
        print(f"checkpoints written: {', '.join(produced)}")


if __name__ == "__main__":
    main()
