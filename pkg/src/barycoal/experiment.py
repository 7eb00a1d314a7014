"""Reproducible experiment harness: configs, dataset synthesis, pipeline, manifest.

A run owns one output directory.  Raw node datasets are written once and only
read by the pretraining stage; everything downstream consumes checkpoints
(plus the target node's local samples), so deleting node data after
pretraining never affects later stages.

The metrics CSV is fully deterministic for a given config and seed; the
wallclock_ms column is left empty there and per-stage durations are recorded
in the manifest instead, which is reference material and not replayed.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .barycenter import BarycenterProblem, default_grid_support, fixed_support_barycenter
from .coalesce import (
    CriticModel,
    GeneratorModel,
    NoisePrior,
    TrainConfig,
    baseline_edge_only,
    baseline_ensemble,
    baseline_transfer,
    train_pretrained,
    train_stage1,
    train_stage2,
)
from .frechet import fit_gaussian, frechet_distance
from .measures import (
    DiscreteMeasure,
    GroundMetric,
    L2,
    measure_from_json,
    measure_to_json,
    w1_cost,
)
from .nn import MLPParams, load_checkpoint, save_checkpoint
from .ternary import TernaryGenerator, TernaryMLP, train_stage2_ternary

__all__ = [
    "ConfigError",
    "StageFailure",
    "ExperimentConfig",
    "DatasetSpec",
    "SynthData",
    "RunManifest",
    "load_experiment_config",
    "synth_dataset",
    "run_pipeline",
    "run_oracle",
    "METRICS_COLUMNS",
    "BASELINES",
]

SCHEMA_VERSION = 1
METRICS_COLUMNS = (
    "run_id",
    "stage",
    "iteration",
    "wallclock_ms",
    "w1_to_target",
    "w1_to_old",
    "frechet_score",
    "objective",
)
BASELINES = ("edge_only", "transfer", "ensemble")
EVAL_SAMPLES = 1000


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


class StageFailure(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class DatasetSpec:
    """Gaussian-mixture scenario: modes per node, samples, and overlap mode."""

    num_nodes: int = 1
    modes_per_node: int = 1
    target_modes: int = 1
    samples_per_node: int = 4000
    target_samples: int = 50
    overlap: str = "non_overlapping"
    sigma: float = 0.1
    dim: int = 2

    def __post_init__(self):
        if self.num_nodes < 1 or self.samples_per_node < 1 or self.target_samples < 1:
            raise ConfigError("node count and sample counts must be >= 1")
        if self.modes_per_node < 1 or self.target_modes < 1:
            raise ConfigError("mode counts must be >= 1")
        if self.overlap not in ("overlapping", "non_overlapping"):
            raise ConfigError(f"overlap must be overlapping|non_overlapping, got {self.overlap!r}")
        if not 0 < self.sigma < 0.5:
            raise ConfigError("sigma must be in (0, 0.5)")
        if self.dim not in (1, 2):
            raise ConfigError("toy datasets are 1D or 2D")
        if self.overlap == "overlapping" and self.target_modes > self.num_nodes * self.modes_per_node:
            raise ConfigError("overlapping target cannot have more modes than the nodes provide")


# pilot-calibrated training recipe for the desk-scale toys; the image-scale
# defaults (gp 10, lr 1e-4, batch 64, beta1 0.5) stay on TrainConfig itself.
# At sigma ~ 0.1 data scale a heavy penalty freezes the critic into the
# slope-1 treadmill and the generator runs away; gp 0.1 with momentum-free
# Adam is stable across seeds.
TOY_TRAIN = dict(batch_size=256, gp_coefficient=0.1, beta1=0.0, beta2=0.9, learning_rate=2e-4)


def _toy_config(iters: int, seed: int = 0) -> TrainConfig:
    return TrainConfig(generator_iters=iters, seed=seed, **TOY_TRAIN)


@dataclass
class ExperimentConfig:
    schema: int = SCHEMA_VERSION
    seed: int = 0
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    radii: list = field(default_factory=lambda: [1.0])
    pretrain: TrainConfig = field(default_factory=lambda: _toy_config(1500))
    stage1: TrainConfig = field(default_factory=lambda: _toy_config(800))
    stage2: TrainConfig = field(default_factory=lambda: _toy_config(500))
    adapt: bool = True
    ternary: bool = False
    baselines: list = field(default_factory=list)
    metrics_every: int = 100
    eval_samples: int = EVAL_SAMPLES

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema {self.schema}; this build reads {SCHEMA_VERSION}")
        if len(self.radii) != self.dataset.num_nodes:
            raise ConfigError(
                f"{self.dataset.num_nodes} nodes need {self.dataset.num_nodes} radii, got {len(self.radii)}"
            )
        if any(r <= 0 for r in self.radii):
            raise ConfigError("radii must be positive")
        for b in self.baselines:
            if b not in BASELINES:
                raise ConfigError(f"unknown baseline {b!r}; expected one of {BASELINES}")
        if self.metrics_every < 0 or self.eval_samples < 100:
            raise ConfigError("metrics_every must be >= 0 and eval_samples >= 100")

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def run_id(self) -> str:
        return f"{self.config_hash()[:12]}-s{self.seed}"


def _build_dataclass(cls, obj: dict, context: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{context}: expected an object")
    allowed = set(cls.__dataclass_fields__)
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    try:
        return cls(**obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def load_experiment_config(path) -> ExperimentConfig:
    """Parse and validate a config file; unknown keys are rejected."""
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON (line {exc.lineno}, column {exc.colno})") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config root must be an object")
    if "schema" not in obj:
        raise ConfigError("config must carry a 'schema' field")
    parsed = dict(obj)
    if "dataset" in parsed:
        parsed["dataset"] = _build_dataclass(DatasetSpec, parsed["dataset"], "dataset")
    for block in ("pretrain", "stage1", "stage2"):
        if block in parsed:
            raw = dict(parsed[block])
            if isinstance(raw.get("weights"), list):
                raw["weights"] = tuple(raw["weights"])
            parsed[block] = _build_dataclass(TrainConfig, raw, block)
    return _build_dataclass(ExperimentConfig, parsed, "config")


@dataclass
class SynthData:
    node_measures: list
    node_mode_ids: list
    target_measure: DiscreteMeasure
    target_labels: np.ndarray
    target_mode_ids: list
    mode_means: np.ndarray
    sigma: float

    def reference(self, mode_ids, n: int, seed: int) -> DiscreteMeasure:
        """Uniform mixture over the given modes, n samples."""
        rng = np.random.default_rng(seed)
        comp = rng.integers(0, len(mode_ids), size=n)
        means = self.mode_means[np.asarray(mode_ids)][comp]
        return DiscreteMeasure.uniform(means + rng.normal(0, self.sigma, size=means.shape))

    @property
    def all_mode_ids(self) -> list:
        return sorted(set(sum(self.node_mode_ids, [])) | set(self.target_mode_ids))


def _mode_layout(total: int, dim: int) -> np.ndarray:
    """Deterministic well-separated means inside (-1, 1)^dim."""
    if dim == 1:
        if total == 1:
            return np.array([[0.0]])
        return np.linspace(-0.5, 0.5, total)[:, None]
    if total == 1:
        return np.array([[0.5, 0.5]])
    angles = 2 * np.pi * np.arange(total) / total
    return 0.55 * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def synth_dataset(spec: DatasetSpec, seed: int) -> SynthData:
    """Per-node measures plus labeled target data, deterministic per seed."""
    k, mpn = spec.num_nodes, spec.modes_per_node
    node_mode_ids = [list(range(i * mpn, (i + 1) * mpn)) for i in range(k)]
    if spec.overlap == "non_overlapping":
        target_mode_ids = list(range(k * mpn, k * mpn + spec.target_modes))
        total = k * mpn + spec.target_modes
    else:
        target_mode_ids = list(range(spec.target_modes))
        total = k * mpn
    means = _mode_layout(total, spec.dim)

    rng = np.random.default_rng(seed)
    node_measures = []
    for ids in node_mode_ids:
        comp = rng.integers(0, len(ids), size=spec.samples_per_node)
        pts = means[np.asarray(ids)][comp] + rng.normal(0, spec.sigma, size=(spec.samples_per_node, spec.dim))
        node_measures.append(DiscreteMeasure.uniform(pts))
    comp = rng.integers(0, len(target_mode_ids), size=spec.target_samples)
    pts = means[np.asarray(target_mode_ids)][comp] + rng.normal(
        0, spec.sigma, size=(spec.target_samples, spec.dim)
    )
    return SynthData(
        node_measures=node_measures,
        node_mode_ids=node_mode_ids,
        target_measure=DiscreteMeasure.uniform(pts),
        target_labels=np.asarray(target_mode_ids)[comp],
        target_mode_ids=target_mode_ids,
        mode_means=means,
        sigma=spec.sigma,
    )


# -- metrics ------------------------------------------------------------------


class MetricsWriter:
    """Append-only CSV with the fixed schema; floats via repr for determinism."""

    def __init__(self, path: Path, run_id: str, truncate: bool = False):
        self.path = Path(path)
        self.run_id = run_id
        if truncate or not self.path.exists():
            self.path.write_text(",".join(METRICS_COLUMNS) + "\n")

    @staticmethod
    def _fmt(x) -> str:
        if x is None:
            return ""
        if isinstance(x, float):
            return repr(x)
        return str(x)

    def row(self, stage, iteration=None, w1_to_target=None, w1_to_old=None,
            frechet_score=None, objective=None):
        # wallclock_ms stays empty: the CSV must replay byte-identically
        cells = [self.run_id, stage, self._fmt(iteration), "",
                 self._fmt(w1_to_target), self._fmt(w1_to_old),
                 self._fmt(frechet_score), self._fmt(objective)]
        with open(self.path, "a") as fh:
            fh.write(",".join(cells) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    run_id: str
    stages: list
    artifacts: dict
    metrics_csv: str
    hashes: dict
    durations_s: dict

    def write(self, path: Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @staticmethod
    def read(path: Path) -> "RunManifest":
        return RunManifest(**json.loads(Path(path).read_text()))

    def verify(self, root: Path) -> None:
        """Every referenced file must exist and re-hash to the recorded value."""
        root = Path(root)
        for rel, digest in self.hashes.items():
            target = root / rel
            if not target.exists():
                raise FileNotFoundError(f"manifest references missing file {rel}")
            if _sha256(target) != digest:
                raise ValueError(f"content hash mismatch for {rel}")


# -- pipeline stages ----------------------------------------------------------


def _stage_seed(master: int, stage: str) -> int:
    digest = hashlib.sha256(f"{master}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _paths(out_dir: Path) -> dict:
    out = Path(out_dir)
    return {
        "data": out / "data",
        "ckpt": out / "checkpoints",
        "metrics": out / "metrics.csv",
        "manifest": out / "manifest.json",
    }


def _save_generator(path, gen: GeneratorModel, stage: str, seed: int, extra=None) -> None:
    header = {
        "kind": "generator",
        "stage": stage,
        "seed": seed,
        "noise_kind": gen.noise_prior.kind,
        "noise_dim": gen.noise_prior.dim,
        "data_dim": gen.data_dim,
    }
    save_checkpoint(path, gen.params, header, extra)


def _load_generator(path) -> GeneratorModel:
    model, header, _ = load_checkpoint(path)
    prior = NoisePrior(header["noise_kind"], header["noise_dim"])
    return GeneratorModel(model, prior, header["data_dim"])


def _save_critic(path, critic: CriticModel, stage: str, seed: int) -> None:
    save_checkpoint(path, critic.params, {"kind": "critic", "stage": stage, "seed": seed})


def _load_critic(path) -> CriticModel:
    model, _, _ = load_checkpoint(path)
    return CriticModel(model)


def _save_ternary_generator(path, gen: TernaryGenerator, stage: str, seed: int) -> None:
    header = {
        "kind": "ternary_generator",
        "stage": stage,
        "seed": seed,
        "noise_kind": gen.noise_prior.kind,
        "noise_dim": gen.noise_prior.dim,
        "data_dim": gen.data_dim,
    }
    proxy = MLPParams([s.weight for s in gen.net.states], gen.net.biases, gen.net.activations)
    extras = {
        "deltas": np.array([s.threshold for s in gen.net.states]),
        "scales": np.array([s.scale for s in gen.net.states]),
    }
    save_checkpoint(path, proxy, header, extras)


def _load_ternary_generator(path) -> TernaryGenerator:
    model, header, extras = load_checkpoint(path)
    net = TernaryMLP.from_mlp(model)
    for state, delta in zip(net.states, extras["deltas"]):
        state.threshold = float(delta)
    net.refresh()
    prior = NoisePrior(header["noise_kind"], header["noise_dim"])
    return TernaryGenerator(net, prior, header["data_dim"])


class PipelineRun:
    """Stateful helper executing pipeline stages against one output directory."""

    def __init__(self, config: ExperimentConfig, out_dir, fresh_metrics: bool = False):
        self.config = config
        self.out = Path(out_dir)
        self.paths = _paths(self.out)
        self.paths["data"].mkdir(parents=True, exist_ok=True)
        self.paths["ckpt"].mkdir(parents=True, exist_ok=True)
        self.metrics = MetricsWriter(self.paths["metrics"], config.run_id, truncate=fresh_metrics)
        self.durations: dict = {}

    # dataset files ----------------------------------------------------------

    def synth(self) -> SynthData:
        data = synth_dataset(self.config.dataset, self.config.seed)
        for k, m in enumerate(data.node_measures):
            (self.paths["data"] / f"node{k}.json").write_text(measure_to_json(m))
        (self.paths["data"] / "target.json").write_text(measure_to_json(data.target_measure))
        (self.paths["data"] / "target_labels.json").write_text(
            json.dumps([int(x) for x in data.target_labels])
        )
        refs = {
            "combined": data.reference(data.all_mode_ids, self.config.eval_samples, _stage_seed(self.config.seed, "ref-combined")),
            "old": data.reference(sorted(set(sum(data.node_mode_ids, []))), self.config.eval_samples, _stage_seed(self.config.seed, "ref-old")),
        }
        for name, ref in refs.items():
            (self.paths["data"] / f"reference_{name}.json").write_text(measure_to_json(ref))
        return data

    def _read_measure(self, name: str) -> DiscreteMeasure:
        path = self.paths["data"] / name
        if not path.exists():
            raise FileNotFoundError(f"{name} missing; run the synth stage first")
        return measure_from_json(path.read_text())

    def _monitor(self, stage: str, references: dict):
        every = self.config.metrics_every
        if every <= 0:
            return None

        def monitor(iteration: int, gen) -> None:
            if iteration % every:
                return
            samples = sample_generator_like(gen, 256, _stage_seed(self.config.seed, f"{stage}-eval"))
            row = {}
            for key, ref in references.items():
                row[key] = w1_cost(samples, ref, L2)
            self.metrics.row(stage, iteration=iteration,
                             w1_to_target=row.get("target"), w1_to_old=row.get("old"))

        return monitor

    # stages -------------------------------------------------------------------

    def pretrain(self) -> list:
        combined = self._read_measure("reference_combined.json")
        pairs = []
        for k in range(self.config.dataset.num_nodes):
            stage = f"pretrain_node{k}"
            dataset = self._read_measure(f"node{k}.json")
            cfg = replace(self.config.pretrain, seed=_stage_seed(self.config.seed, stage))
            t0 = time.perf_counter()
            gen, critic = train_pretrained(dataset, cfg, self._monitor(stage, {"target": combined}))
            self.durations[stage] = time.perf_counter() - t0
            _save_generator(self.paths["ckpt"] / f"gen_node{k}.ckpt", gen, stage, cfg.seed)
            _save_critic(self.paths["ckpt"] / f"critic_node{k}.ckpt", critic, stage, cfg.seed)
            pairs.append((gen, critic))
        return pairs

    def _load_pretrained(self) -> list:
        pairs = []
        for k in range(self.config.dataset.num_nodes):
            gen = _load_generator(self.paths["ckpt"] / f"gen_node{k}.ckpt")
            critic = _load_critic(self.paths["ckpt"] / f"critic_node{k}.ckpt")
            pairs.append((gen, critic))
        return pairs

    def coalesce(self) -> tuple:
        pairs = self._load_pretrained()
        stage = "stage1"
        if len(pairs) == 1:
            # single source: the barycenter is the pre-trained model itself and
            # both adaptation critics start from its critic
            gen, critic = pairs[0]
            meta = (gen.clone(), critic.clone(), critic.clone())
        else:
            # lambda_k = 1/eta_k on the incoming node; the replay side carries the
            # accumulated weight of everything coalesced so far
            lam = [1.0 / r for r in self.config.radii]
            weights = [(lam[k], sum(lam[:k])) for k in range(1, len(pairs))]
            cfg = replace(self.config.stage1, seed=_stage_seed(self.config.seed, stage))
            combined = self._read_measure("reference_combined.json")
            t0 = time.perf_counter()
            meta = train_stage1(pairs, weights, cfg, monitor=self._monitor(stage, {"target": combined}))
            self.durations[stage] = time.perf_counter() - t0
        gen, replay_critic, data_critic = meta
        _save_generator(self.paths["ckpt"] / "stage1_gen.ckpt", gen, stage, self.config.seed)
        _save_critic(self.paths["ckpt"] / "stage1_critic_replay.ckpt", replay_critic, stage, self.config.seed)
        _save_critic(self.paths["ckpt"] / "stage1_critic_data.ckpt", data_critic, stage, self.config.seed)
        return meta

    def _load_meta(self) -> tuple:
        return (
            _load_generator(self.paths["ckpt"] / "stage1_gen.ckpt"),
            _load_critic(self.paths["ckpt"] / "stage1_critic_replay.ckpt"),
            _load_critic(self.paths["ckpt"] / "stage1_critic_data.ckpt"),
        )

    def adapt(self, ternary: bool = False):
        meta_gen, replay_critic, data_critic = self._load_meta()
        local = self._read_measure("target.json")
        combined = self._read_measure("reference_combined.json")
        old = self._read_measure("reference_old.json")
        stage = "stage2_ternary" if ternary else "stage2"
        cfg = replace(self.config.stage2, seed=_stage_seed(self.config.seed, stage))
        refs = {"target": combined, "old": old}
        t0 = time.perf_counter()
        if ternary:
            model = train_stage2_ternary(meta_gen, (replay_critic, data_critic), local, cfg,
                                         monitor=self._monitor(stage, refs))
            self.durations[stage] = time.perf_counter() - t0
            _save_ternary_generator(self.paths["ckpt"] / "stage2_ternary_gen.ckpt", model, stage, cfg.seed)
        else:
            model = train_stage2(meta_gen, (replay_critic, data_critic), local, cfg,
                                 monitor=self._monitor(stage, refs))
            self.durations[stage] = time.perf_counter() - t0
            _save_generator(self.paths["ckpt"] / "stage2_gen.ckpt", model, stage, cfg.seed)
        return model

    def baseline(self, name: str):
        if name not in BASELINES:
            raise ConfigError(f"unknown baseline {name!r}")
        local = self._read_measure("target.json")
        combined = self._read_measure("reference_combined.json")
        old = self._read_measure("reference_old.json")
        stage = f"baseline_{name}"
        cfg = replace(self.config.stage2, seed=_stage_seed(self.config.seed, stage))
        refs = {"target": combined, "old": old}
        t0 = time.perf_counter()
        if name == "edge_only":
            model = baseline_edge_only(local, cfg, monitor=self._monitor(stage, refs))
        elif name == "transfer":
            pretrained = _load_generator(self.paths["ckpt"] / "gen_node0.ckpt")
            model = baseline_transfer(pretrained, local, cfg, monitor=self._monitor(stage, refs))
        else:
            gens = [g for g, _ in self._load_pretrained()]
            model = baseline_ensemble(gens, local, cfg, monitor=self._monitor(stage, refs))
        self.durations[stage] = time.perf_counter() - t0
        _save_generator(self.paths["ckpt"] / f"{stage}_gen.ckpt", model, stage, cfg.seed)
        return model

    def evaluate(self) -> dict:
        """Score every generator checkpoint present against the references.

        The objective column carries the Stage-II Lagrangian at the configured
        weights: lambda_data W1(samples, local data) + lambda_replay
        W1(samples, Stage-I samples); empty when Stage I was skipped.
        """
        combined = self._read_measure("reference_combined.json")
        old = self._read_measure("reference_old.json")
        local = self._read_measure("target.json")
        meta_path = self.paths["ckpt"] / "stage1_gen.ckpt"
        meta_samples = None
        if meta_path.exists():
            meta_samples = sample_generator_like(
                _load_generator(meta_path), self.config.eval_samples,
                _stage_seed(self.config.seed, "eval-meta-ref"),
            )
        lam_data, lam_replay = self.config.stage2.weights
        scores = {}
        for path in sorted(self.paths["ckpt"].glob("*gen*.ckpt")):
            name = path.stem
            if name.startswith("stage2_ternary"):
                model = _load_ternary_generator(path)
            else:
                model = _load_generator(path)
            samples = sample_generator_like(model, self.config.eval_samples,
                                            _stage_seed(self.config.seed, f"eval-{name}"))
            w1_target = w1_cost(samples, combined, L2)
            w1_old = w1_cost(samples, old, L2)
            fre = frechet_distance(fit_gaussian(samples), fit_gaussian(combined))
            objective = None
            if meta_samples is not None:
                objective = lam_data * w1_cost(samples, local, L2) + lam_replay * w1_cost(
                    samples, meta_samples, L2
                )
            self.metrics.row(f"eval_{name}", w1_to_target=w1_target, w1_to_old=w1_old,
                             frechet_score=fre, objective=objective)
            scores[name] = {"w1_to_target": w1_target, "w1_to_old": w1_old, "frechet": fre}
        return scores

    def write_manifest(self, stages: list) -> RunManifest:
        artifacts = {}
        hashes = {}
        for path in sorted(self.out.rglob("*")):
            if path.is_file() and path.name != "manifest.json":
                rel = str(path.relative_to(self.out))
                hashes[rel] = _sha256(path)
                if path.suffix == ".ckpt":
                    artifacts[path.stem] = rel
        manifest = RunManifest(
            config_hash=self.config.config_hash(),
            run_id=self.config.run_id,
            stages=stages,
            artifacts=artifacts,
            metrics_csv=str(self.paths["metrics"].relative_to(self.out)),
            hashes=hashes,
            durations_s={k: round(v, 3) for k, v in self.durations.items()},
        )
        manifest.write(self.paths["manifest"])
        return manifest


def sample_generator_like(model, n: int, seed: int) -> DiscreteMeasure:
    """Uniform sample measure from a full-precision or ternary generator."""
    rng = np.random.default_rng(seed)
    return DiscreteMeasure.uniform(model.sample(n, rng))


def run_pipeline(config: ExperimentConfig, out_dir) -> RunManifest:
    """synth -> pretrain -> coalesce -> adapt (+ternary) -> baselines -> eval -> manifest.

    A failing stage raises StageFailure naming the stage; checkpoints written
    by earlier stages are preserved.
    """
    run = PipelineRun(config, out_dir, fresh_metrics=True)
    stages = []

    def step(name: str, fn):
        try:
            result = fn()
        except Exception as exc:
            raise StageFailure(name, exc) from exc
        stages.append(name)
        return result

    step("synth", run.synth)
    step("pretrain", run.pretrain)
    if config.adapt:
        step("coalesce", run.coalesce)
        step("adapt", run.adapt)
        if config.ternary:
            step("adapt_ternary", lambda: run.adapt(ternary=True))
        for name in config.baselines:
            step(f"baseline_{name}", lambda name=name: run.baseline(name))
    step("eval", run.evaluate)
    return run.write_manifest(stages)


# -- oracle -------------------------------------------------------------------


def run_oracle(problem_path, result_path, points_per_axis: int = 11) -> dict:
    """Solve a barycenter problem file and write nu, objective, per-input W1."""
    try:
        obj = json.loads(Path(problem_path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"problem file is not valid JSON (line {exc.lineno}, column {exc.colno})"
        ) from exc
    if not isinstance(obj, dict):
        raise ConfigError("problem root must be an object")
    unknown = set(obj) - {"schema", "metric", "inputs", "support"}
    if unknown:
        raise ConfigError(f"problem file: unknown keys {sorted(unknown)}")
    if obj.get("schema", 1) != 1:
        raise ConfigError("unsupported problem schema")
    try:
        metric = GroundMetric(obj.get("metric", "l2"))
    except ValueError as exc:
        raise ConfigError(f"field 'metric': {exc}") from exc
    raw_inputs = obj.get("inputs")
    if not isinstance(raw_inputs, list) or not raw_inputs:
        raise ConfigError("field 'inputs': need a non-empty list")
    inputs = []
    for i, item in enumerate(raw_inputs):
        try:
            measure = DiscreteMeasure(
                np.asarray(item["points"], dtype=float),
                np.asarray(item["weights"], dtype=float),
            )
            lam = float(item.get("weight", 1.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"field 'inputs[{i}]': {exc}") from exc
        inputs.append((measure, lam))
    if "support" in obj:
        support = np.asarray(obj["support"], dtype=float)
    else:
        support = default_grid_support([m for m, _ in inputs], points_per_axis)
    try:
        problem = BarycenterProblem(inputs, support, metric)
        nu, objective = fixed_support_barycenter(problem)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = {
        "objective": objective,
        "barycenter": {"points": nu.points.tolist(), "weights": nu.weights.tolist()},
        "per_input_w1": [w1_cost(nu, m, metric) for m, _ in inputs],
    }
    Path(result_path).write_text(json.dumps(result, indent=2) + "\n")
    return result
