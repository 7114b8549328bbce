# prepare_datasets.py
import argparse
import sys
from pathlib import Path

from samples.dataset import write_csv
from samples.scenarios import ScenarioFamily, generate, load_scenario_config, scenario

# --- Configuration ---
# Reads scenario YAML files from here...
CONFIG_DIR = Path("experiments/configs")
# ...and writes one CSV per config here.
OUTPUT_DIR = Path("data")
# ---------------------


def prepare_datasets(config_dir: Path = CONFIG_DIR, output_dir: Path = OUTPUT_DIR) -> int:
    """
    Generates the dataset described by every *.yaml file in `config_dir` and
    saves it as <name>.csv in `output_dir`. Returns the number of files written.
    """
    configs = sorted(Path(config_dir).glob("*.yaml"))
    if not configs:
        print(f"Error: no scenario configs found in {config_dir}", file=sys.stderr)
        return 0

    print(f"Generating {len(configs)} datasets from {config_dir}...")
    written = 0
    for path in configs:
        spec = load_scenario_config(path)
        data = generate(spec)
        out = Path(output_dir) / f"{path.stem}.csv"
        write_csv(data, out)
        written += 1
        print(f"  ... {path.name}: {spec.family.value}, n0={data.n0}, n1={data.n1}, D={data.dim} -> {out}")

    print("\n--- Generation Complete ---")
    print(f"Datasets written: {written}")
    return written


def main():
    parser = argparse.ArgumentParser(description="Write scenario datasets to CSV")
    parser.add_argument("--config-dir", type=Path, default=CONFIG_DIR, help="Directory of scenario YAML files.")
    parser.add_argument("--output-dir", type=Path, default=OUTPUT_DIR, help="Where the CSV files go.")
    parser.add_argument("--family", choices=[f.value for f in ScenarioFamily], default=None,
                        help="Write a single scenario with its default sizes instead of reading configs.")
    parser.add_argument("--dim", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    try:
        if args.family is not None:
            spec = scenario(args.family, dim=args.dim, seed=args.seed)
            out = args.output_dir / f"{spec.family.value}_D{spec.dim}_seed{spec.seed}.csv"
            write_csv(generate(spec), out)
            print(f"Results saved to: {out}")
        elif prepare_datasets(args.config_dir, args.output_dir) == 0:
            sys.exit(1)
    except (ValueError, FileNotFoundError) as e:
        print(f"Error during generation: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
