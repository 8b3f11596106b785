import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import BundleLoadError, ConfigurationError

log = logging.getLogger(__name__)

TRUE_VALUES = {"1", "true", "yes", "on"}
FALSE_VALUES = {"0", "false", "no", "off"}


def option(default, help):
    return field(default=default, metadata={"help": help})


def parse_value(kind, raw, key):
    raw = raw.strip()
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in TRUE_VALUES:
                return True
            if lowered in FALSE_VALUES:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigurationError(f"Invalid value for {key}: {e}") from e


def read_key_values(path):
    """
    Parses a flat ``key = value`` file. Blank lines and ``#`` comments are ignored.

    Raises:
        BundleLoadError: If the file cannot be read.
        ConfigurationError: On a line without ``=``.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise BundleLoadError(f"Cannot read config file {path}: {e}") from e
    values = {}
    for number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{number}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


class FileConfig:
    """Shared loading, override and hashing logic of the config dataclasses."""

    @classmethod
    def field_types(cls):
        return {f.name: type(f.default) for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, raw, base=None):
        types = cls.field_types()
        unknown = sorted(set(raw) - set(types))
        if unknown:
            raise ConfigurationError(f"Unknown config key(s): {', '.join(unknown)}")
        values = {key: parse_value(types[key], value, key) if isinstance(value, str) else value for key, value in raw.items()}
        config = dataclasses.replace(base, **values) if base is not None else cls(**values)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path, base=None):
        config = cls.from_dict(read_key_values(path), base=base)
        log.info(f"Loaded {cls.__name__} from {path}")
        return config

    def overrides(self, **values):
        """Returns a copy with the non-None ``values`` applied."""
        values = {key: value for key, value in values.items() if value is not None}
        return type(self).from_dict(values, base=self)

    def to_dict(self):
        return dataclasses.asdict(self)

    def config_hash(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def validate(self):
        # Re-defined in all sub-classes
        raise NotImplementedError


@dataclass
class CondenseConfig(FileConfig):
    reduction_rate: float = option(0.005, "reduction rate r of labeled (train) nodes")
    rate_basis: str = option("labeled", "'labeled' (rate of train nodes) or 'overall' (rate of all nodes)")
    repeats: int = option(1, "independent condensation repeats n")
    epochs: int = option(600, "training epochs T")
    lr_feat: float = option(0.01, "learning rate of the condensed features X'")
    lr_struct: float = option(0.01, "learning rate of the structure net")
    lr_sgc: float = option(0.01, "learning rate of the SGC weights")
    beta: float = option(0.1, "weight of the Frobenius regularizer on A'")
    tau1: int = option(40, "feature-update epochs per schedule window")
    tau2: int = option(10, "structure-update epochs per schedule window")
    curvature: float = option(-0.1, "Poincare ball curvature (negative)")
    sgc_layers: int = option(2, "SGC propagation depth K")
    hidden_units: int = option(256, "hidden width of the SGC and the structure net")
    struct_layers: int = option(2, "hidden layers of the structure net")
    outer_loops: int = option(10, "SGC re-initializations per repeat")
    inner_loops: int = option(1, "SGC steps per epoch")
    k_eig: int = option(0, "Laplacian eigenvectors for selection (0 = classes + 1)")
    dense_threshold: int = option(3000, "largest graph solved with a dense eigensolver")
    similarity: str = option("cosine-eigen", "node similarity used for selection")
    epsilon: float = option(1e-10, "similarity denominator guard")
    selection: str = option("jaccard", "'jaccard' or 'random' initialization")
    sample_size: int = option(256, "minimum per-class original sample size")
    sample_multiplier: int = option(10, "per-class sample size as a multiple of the class budget")
    momentum: float = option(0.9, "momentum of the structure optimizer")
    weight_decay: float = option(5e-4, "weight decay of the structure optimizer")
    eval_every: int = option(50, "epochs between validation checkpoints")
    edge_threshold: float = option(0.5, "A' weight above which a pair is a link")
    lp_epochs: int = option(100, "link-prediction epochs for checkpoint validation")
    lp_hidden: int = option(128, "link-prediction hidden units")
    lp_lr: float = option(0.001, "link-prediction learning rate")
    strict_loop: bool = option(False, "rebuild A' inside the class loop")
    batch_norm: bool = option(True, "hyperbolic batch normalization in the structure net")
    workers: int = option(1, "concurrent repeats")
    seed: int = option(0, "run seed")

    def validate(self):
        """
        Raises:
            ConfigurationError: On the first invalid field.
        """
        if not 0.0 < self.reduction_rate < 1.0:
            raise ConfigurationError(f"reduction_rate must lie in (0, 1), got {self.reduction_rate}")
        if self.rate_basis not in ("labeled", "overall"):
            raise ConfigurationError(f"rate_basis must be 'labeled' or 'overall', got {self.rate_basis!r}")
        if self.tau1 < 1 or self.tau2 < 1:
            raise ConfigurationError(f"tau1 and tau2 must be >= 1, got {self.tau1} and {self.tau2}")
        if self.epochs < self.tau1 + self.tau2:
            raise ConfigurationError(f"epochs ({self.epochs}) must be >= tau1 + tau2 ({self.tau1 + self.tau2})")
        if self.curvature >= 0:
            raise ConfigurationError(f"curvature must be negative, got {self.curvature}")
        if self.selection not in ("jaccard", "random"):
            raise ConfigurationError(f"selection must be 'jaccard' or 'random', got {self.selection!r}")
        if self.similarity != "cosine-eigen":
            raise ConfigurationError(f"Unsupported similarity {self.similarity!r}")
        for name in ("repeats", "epochs", "sgc_layers", "hidden_units", "struct_layers", "outer_loops",
                     "inner_loops", "eval_every", "lp_epochs", "lp_hidden", "workers", "sample_size",
                     "sample_multiplier", "dense_threshold"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("lr_feat", "lr_struct", "lr_sgc", "lp_lr", "epsilon"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.beta < 0 or self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise ConfigurationError("beta and weight_decay must be >= 0, momentum in [0, 1)")
        if not 0.0 <= self.edge_threshold < 1.0:
            raise ConfigurationError(f"edge_threshold must lie in [0, 1), got {self.edge_threshold}")
        if self.k_eig < 0:
            raise ConfigurationError(f"k_eig must be >= 0, got {self.k_eig}")


@dataclass
class EvalConfig(FileConfig):
    runs: int = option(10, "seeded evaluation runs")
    lp_epochs: int = option(100, "link-prediction epochs")
    lp_hidden: int = option(128, "link-prediction hidden units")
    lp_lr: float = option(0.001, "link-prediction learning rate")
    edge_threshold: float = option(0.5, "A' weight above which a pair is a link")
    train_ratio: float = option(0.7, "share of edges used for training")
    val_ratio: float = option(0.1, "share of edges used for validation")
    test_ratio: float = option(0.2, "share of edges used for testing")
    target_epochs: int = option(200, "node-classifier epochs of the attack target")
    target_hidden: int = option(256, "node-classifier hidden units")
    target_lr: float = option(0.01, "node-classifier learning rate")
    efficiency_epochs: int = option(1000, "link-prediction epochs timed by the efficiency task")
    efficiency_repeats: int = option(3, "timed efficiency runs")
    workers: int = option(1, "concurrent runs")
    seed: int = option(0, "run seed")

    @property
    def ratios(self):
        return (self.train_ratio, self.val_ratio, self.test_ratio)

    def validate(self):
        for name in ("runs", "lp_epochs", "lp_hidden", "target_epochs", "target_hidden", "efficiency_epochs",
                     "efficiency_repeats", "workers"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if min(self.ratios) < 0 or abs(sum(self.ratios) - 1.0) > 1e-9 or self.train_ratio == 0:
            raise ConfigurationError(f"Edge split ratios must be non-negative and sum to 1, got {self.ratios}")
        if not self.lp_lr > 0 or not self.target_lr > 0:
            raise ConfigurationError("Learning rates must be positive")
        if not 0.0 <= self.edge_threshold < 1.0:
            raise ConfigurationError(f"edge_threshold must lie in [0, 1), got {self.edge_threshold}")
