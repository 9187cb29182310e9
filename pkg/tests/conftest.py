import numpy as np
import pytest

from foodtrends.corpus.builders import assign_splits
from foodtrends.corpus.manifest import DatasetManifest, LabeledExample
from foodtrends.fusion.features import FeatureTable, Modality


def make_manifest(class_sizes, dataset_name="toy", caption="some caption"):
    """Manifest with the given per-class sizes; ids are c{label}-{j}."""
    classes = tuple(f"class{c}" for c in range(len(class_sizes)))
    examples = []
    for c, size in enumerate(class_sizes):
        for j in range(size):
            examples.append(
                LabeledExample(
                    example_id=f"c{c}-{j}",
                    content_hash=f"hash-{c}-{j}",
                    caption=caption,
                    label=c,
                )
            )
    return DatasetManifest(dataset_name=dataset_name, classes=classes, examples=tuple(examples))


def separable_tables(manifest, d_img=16, d_txt=8, margin=6.0, noise=0.3, seed=0):
    """Cluster-per-class image features plus uninformative text features."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(len(manifest.classes), d_img)) * margin
    img_rows, txt_rows = {}, {}
    for ex in manifest.examples:
        img_rows[ex.example_id] = (
            centers[ex.label] + rng.normal(size=d_img) * noise
        ).astype(np.float32)
        txt_rows[ex.example_id] = rng.normal(size=d_txt).astype(np.float32)
    return (
        FeatureTable(Modality.IMAGE, d_img, img_rows),
        FeatureTable(Modality.TEXT, d_txt, txt_rows),
    )


@pytest.fixture
def small_split_manifest():
    return assign_splits(make_manifest([30, 30, 30]), seed=11)
