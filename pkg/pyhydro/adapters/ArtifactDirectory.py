import logging

import numpy as np
import pandas as pd

from .BaseAdapter import Adapter
from ..exceptions import BundleLoadError, ValidationError
from ..graphs import CondensedGraph
from ..hyperbolic import HyperbolicStructureNet

log = logging.getLogger(__name__)

CONDENSED_DIR = "condensed"
META_FILE = "meta.json"
ADJ_FILE = "adj.f32"
FEATURES_FILE = "features.f32"
LABELS_FILE = "labels.tsv"
HISTORY_FILE = "history.csv"
NET_FILE = "net.f32"
NET_META_FILE = "net.json"
SELECTION_FILE = "selection.json"


class ArtifactDirectory(Adapter):
    """
    Adapter for a condensation output directory.

    Layout (under ``<root>/condensed/``):
        meta.json     provenance, config hash, seed, shapes
        adj.f32       dense budget x budget float32 weights
        features.f32  budget x num_features float32
        labels.tsv    one integer per line
        history.csv   epoch, phase, loss components, val_f1
        net.f32       structure-net parameters (float32, ``net.json`` order)
        net.json      layer shapes, curvature, normalization flag
    ``selection.json`` is written to the root.
    """

    def __init__(self, path):
        super().__init__(path)
        self.root = self.path
        if (self.path / CONDENSED_DIR).is_dir() or not (self.path / META_FILE).is_file():
            self.path = self.path / CONDENSED_DIR
        else:
            self.root = self.path.parent

    def write(self, condensed):
        self.path.mkdir(parents=True, exist_ok=True)
        meta = {
            "name": condensed.name,
            "num_nodes": condensed.num_nodes,
            "num_features": condensed.num_features,
            "num_classes": condensed.num_classes,
            "provenance": condensed.provenance,
        }
        self.write_json(META_FILE, meta)
        np.asarray(condensed.adjacency_matrix(), dtype="<f4").tofile(self.path / ADJ_FILE)
        np.asarray(condensed.features, dtype="<f4").tofile(self.path / FEATURES_FILE)
        np.savetxt(self.path / LABELS_FILE, condensed.labels, fmt="%d")
        if condensed.history is not None:
            condensed.history.to_csv(self.path / HISTORY_FILE, index=False, float_format="%.10g")
        if condensed.net is not None:
            self.write_net(condensed.net)
        if condensed.selection is not None:
            Adapter(self.root).write_json(SELECTION_FILE, condensed.selection.to_dict())
        log.info(f"Saved condensed graph with {condensed.num_nodes} nodes to {self.path}")
        return self.path

    def write_net(self, net):
        meta, arrays = net.state()
        self.write_json(NET_META_FILE, meta)
        blob = np.concatenate([np.ravel(value) for value in arrays.values()]) if arrays else np.zeros(0)
        blob.astype("<f4").tofile(self.path / NET_FILE)

    def read_blob(self, filename, shape):
        path = self.require(filename)
        data = np.fromfile(path, dtype="<f4")
        if data.size != int(np.prod(shape)):
            raise ValidationError(f"{path} holds {data.size} floats, expected shape {tuple(shape)}")
        return data.reshape(shape).astype(np.float64)

    def read(self):
        """
        Loads the condensed graph, with its history and structure net when present.

        Raises:
            BundleLoadError: If a required file is missing.
            ValidationError: If a blob has the wrong size or A' is invalid.
        """
        meta = self.read_json(META_FILE)
        try:
            b, f, c = int(meta["num_nodes"]), int(meta["num_features"]), int(meta["num_classes"])
        except (KeyError, TypeError, ValueError) as e:
            raise BundleLoadError(f"Invalid {META_FILE} in {self.path}: {e}") from e
        weights = self.read_blob(ADJ_FILE, (b, b))
        features = self.read_blob(FEATURES_FILE, (b, f))
        labels = np.loadtxt(self.require(LABELS_FILE), dtype=np.int64, ndmin=1)
        condensed = CondensedGraph(weights, features, labels, c, meta.get("provenance", {}), name=meta.get("name", ""))
        if (self.path / HISTORY_FILE).is_file():
            condensed.history = pd.read_csv(self.path / HISTORY_FILE)
        if (self.path / NET_META_FILE).is_file():
            condensed.net = self.read_net()
        return condensed

    def read_net(self):
        meta = self.read_json(NET_META_FILE)
        blob = np.fromfile(self.require(NET_FILE), dtype="<f4").astype(np.float64)
        arrays, offset = {}, 0
        for name, shape in meta["arrays"]:
            size = int(np.prod(shape))
            if offset + size > blob.size:
                raise ValidationError(f"{NET_FILE} is too short for array {name}")
            arrays[name] = blob[offset:offset + size].reshape(shape)
            offset += size
        return HyperbolicStructureNet.from_state(meta, arrays)


def save_condensed(condensed, path):
    return ArtifactDirectory(path).write(condensed)


def load_condensed(path):
    return ArtifactDirectory(path).read()
