from .BaseAdapter import Adapter, write_report
from .BundleDirectory import BundleDirectory, load_bundle, save_bundle
from .ArtifactDirectory import ArtifactDirectory, load_condensed, save_condensed
from .Dot import DotFile, export_dot, read_dot_edges
