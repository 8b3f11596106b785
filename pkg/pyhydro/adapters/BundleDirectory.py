import logging
import warnings

import numpy as np

from .BaseAdapter import Adapter
from ..exceptions import BundleLoadError, ValidationError
from ..graphs import GraphBundle
from ..helper import Split

log = logging.getLogger(__name__)

META_FILE = "meta.json"
EDGES_FILE = "edges.tsv"
FEATURES_FILE = "features.f32"
LABELS_FILE = "labels.tsv"
SPLIT_FILE = "split.json"


class BundleDirectory(Adapter):
    """
    Adapter for the bundle directory layout.

    Layout:
        meta.json     {num_nodes, num_features, num_classes, name}
        edges.tsv     two 0-based integer columns, one undirected edge per line
        features.f32  raw little-endian float32, row-major, num_nodes x num_features
        labels.tsv    one integer per line
        split.json    {train, val, test} integer arrays
    """

    @staticmethod
    def read_integers(path, columns):
        with warnings.catch_warnings():
            # empty edge lists are valid
            warnings.simplefilter("ignore", UserWarning)
            try:
                data = np.loadtxt(path, dtype=np.int64, ndmin=2)
            except ValueError as e:
                raise BundleLoadError(f"Malformed integer table {path}: {e}") from e
        if data.size == 0:
            return np.zeros((0, columns), dtype=np.int64)
        if data.shape[1] != columns:
            raise BundleLoadError(f"Expected {columns} column(s) in {path}, got {data.shape[1]}")
        return data

    def read(self):
        """
        Loads and validates a bundle.

        Returns:
            GraphBundle: The symmetrized, deduplicated, self-loop free bundle.

        Raises:
            BundleLoadError: If a file is missing or unreadable.
            ValidationError: If an index is out of range or a feature is non-finite.
        """
        meta = self.read_json(META_FILE)
        try:
            num_nodes = int(meta["num_nodes"])
            num_features = int(meta["num_features"])
            num_classes = int(meta["num_classes"])
        except (KeyError, TypeError, ValueError) as e:
            raise BundleLoadError(f"Invalid {META_FILE} in {self.path}: {e}") from e
        name = meta.get("name", self.path.name)

        edges = self.read_integers(self.require(EDGES_FILE), 2)

        features_path = self.require(FEATURES_FILE)
        features = np.fromfile(features_path, dtype="<f4")
        if features.size != num_nodes * num_features:
            raise ValidationError(
                f"{features_path} holds {features.size} floats, expected {num_nodes} x {num_features}"
            )
        features = features.reshape(num_nodes, num_features).astype(np.float32)

        labels = self.read_integers(self.require(LABELS_FILE), 1).ravel()

        split_data = self.read_json(SPLIT_FILE)
        split = Split(split_data.get("train", []), split_data.get("val", []), split_data.get("test", []))

        bundle = GraphBundle.from_edges(
            num_nodes, edges, features, labels, split, num_classes=num_classes, name=name
        )
        log.info(f"Loaded bundle {name}: {bundle.num_nodes} nodes, {bundle.num_edges} edges")
        return bundle

    def write(self, bundle):
        self.path.mkdir(parents=True, exist_ok=True)
        self.write_json(
            META_FILE,
            {
                "name": bundle.name,
                "num_nodes": bundle.num_nodes,
                "num_features": bundle.num_features,
                "num_classes": bundle.num_classes,
            },
        )
        np.savetxt(self.path / EDGES_FILE, bundle.edge_array(), fmt="%d", delimiter="\t")
        np.asarray(bundle.features, dtype="<f4").tofile(self.path / FEATURES_FILE)
        np.savetxt(self.path / LABELS_FILE, bundle.labels, fmt="%d")
        self.write_json(SPLIT_FILE, bundle.split.to_dict())
        log.info(f"Saved bundle {bundle.name} to {self.path}")
        return self.path


def load_bundle(path):
    return BundleDirectory(path).read()


def save_bundle(bundle, path):
    return BundleDirectory(path).write(bundle)
