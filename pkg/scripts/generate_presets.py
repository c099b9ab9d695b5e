import argparse
import json
import os
import sys
from typing import List, Optional

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.experiment import PRESETS, ExperimentConfig  # noqa: E402


# -----------------------------
# Helpers
# -----------------------------

def render_preset(name: str, seed: Optional[int] = None) -> dict:
    """Fully expanded config of a preset, so every default is visible in the file"""
    config = ExperimentConfig.from_dict(PRESETS[name])
    if seed is not None:
        config = config.with_seed(seed)
    return config.to_dict()


def write_presets(output: str, names: List[str], seed: Optional[int] = None) -> List[str]:
    os.makedirs(output, exist_ok=True)
    paths = []
    for name in names:
        path = os.path.join(output, f"{name}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(render_preset(name, seed), f, indent=2, sort_keys=True)
            f.write("\n")
        paths.append(path)
    return paths


def main(argv: Optional[List[str]] = None) -> None:
    parser = argparse.ArgumentParser(description="Write the built-in experiment presets as editable JSON configs")
    parser.add_argument("--output", default=os.path.join("data", "presets"),
                        help="Output directory (default: data/presets)")
    parser.add_argument("--presets", default=",".join(PRESETS),
                        help="Comma-separated preset names")
    parser.add_argument("--seed", type=int, help="Override scenario.seed in every preset")
    args = parser.parse_args(argv)

    names = [n for n in args.presets.split(",") if n]
    unknown = [n for n in names if n not in PRESETS]
    if unknown:
        parser.error(f"Unknown presets: {', '.join(unknown)}")

    for path in write_presets(args.output, names, args.seed):
        print(f"Generated {path}")
    print("Done.")


if __name__ == "__main__":
    main()
