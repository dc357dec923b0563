"""Regenerate the bundled params file and example models.

Run from the repository root: python3 scripts/make_bundled.py
"""

from pathlib import Path

from hybridpi.nn import build_model, bundled_specs, random_input, reference_infer, save_model_spec, save_vector
from hybridpi.params import SystemParams

DATA = Path(__file__).resolve().parents[1] / "src" / "hybridpi" / "data"


def main() -> None:
    params = SystemParams.generate(seed=0)
    params.save(DATA / "params.json")
    models = DATA / "models"
    models.mkdir(exist_ok=True)
    for i, (name, spec) in enumerate(bundled_specs(params.he.p).items()):
        model = build_model(spec)
        save_model_spec(spec, models / f"{name}.json")
        x = random_input(model, seed=100 + i)
        save_vector(x, models / f"{name}.input.json", model.p)
        save_vector(reference_infer(model, x), models / f"{name}.expected.json", model.p)
        print(f"{name}: {len(model.linear)} linear layers, {model.relu_count} ReLUs")


if __name__ == "__main__":
    main()
