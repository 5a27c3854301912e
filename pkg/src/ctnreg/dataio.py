"""Dataset ingestion, preprocessing, synthetic data, splits, and feature export.

CSV files are comma-separated UTF-8 with decimal reals; the label column is
selected by name (requires a header) or by index.  Floats are written with
17 significant digits so write/load round-trips are bit-exact.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

FLOAT_FMT = "%.17g"


@dataclass
class Dataset:
    """Design matrix, one-hot labels, and optional metadata.

    ``x`` is (n, m), ``y`` is (n, c) one-hot.  ``class_names`` maps class
    index to the original label string; ``tensor_shape``, when present,
    gives per-sample mode sizes whose product is m.
    """

    x: np.ndarray
    y: np.ndarray
    class_names: list = None
    tensor_shape: tuple = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 2 or self.y.ndim != 2:
            raise InvalidInputError("x and y must be 2-D")
        if self.x.shape[0] != self.y.shape[0]:
            raise InvalidInputError("x and y row counts disagree")
        if self.y.shape[0]:
            ok = np.all((self.y == 0.0) | (self.y == 1.0)) and np.all(
                self.y.sum(axis=1) == 1.0
            )
            if not ok:
                raise InvalidInputError("y rows must be one-hot")
        if self.class_names is not None and len(self.class_names) != self.y.shape[1]:
            raise InvalidInputError("class_names length must equal the class count")
        if self.tensor_shape is not None:
            self.tensor_shape = tuple(int(s) for s in self.tensor_shape)
            if int(np.prod(self.tensor_shape)) != self.x.shape[1]:
                raise InvalidInputError("tensor_shape product must equal feature count")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def n_features(self):
        return self.x.shape[1]

    @property
    def n_classes(self):
        return self.y.shape[1]

    @property
    def labels(self):
        """Integer class index per row."""
        return np.argmax(self.y, axis=1)


def _one_hot(labels, n_classes):
    y = np.zeros((len(labels), n_classes))
    y[np.arange(len(labels)), labels] = 1.0
    return y


def load_csv(path, label_column, has_header=True, class_names=None):
    """Load a delimited dataset; labels map to class indices.

    Parameters
    ----------
    path : str or Path
    label_column : str or int
        Column holding the label, by header name or 0-based index.
    has_header : bool
    class_names : list of str, optional
        Enforce an existing label mapping (e.g. the training set's); a
        label outside it raises.  Without it, labels are assigned class
        indices in order of first appearance.

    Raises on missing files, ragged rows, and non-numeric features, naming
    the offending line.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    header = None
    if has_header:
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    if isinstance(label_column, str):
        if header is None:
            raise InvalidInputError("label column by name requires a header")
        if label_column not in header:
            raise InvalidInputError(f"label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)
    width = len(rows[0]) if rows else (len(header) if header else 0)
    if not -width <= label_idx < width:
        raise InvalidInputError(f"label column index {label_idx} out of range")
    label_idx %= width

    names = list(class_names) if class_names is not None else []
    fixed_mapping = class_names is not None
    feats, labels = [], []
    offset = 2 if has_header else 1
    for i, row in enumerate(rows):
        line_no = i + offset
        if len(row) != width:
            raise InvalidInputError(
                f"{path}:{line_no}: expected {width} columns, got {len(row)}"
            )
        raw_label = row[label_idx].strip()
        if raw_label not in names:
            if fixed_mapping:
                raise InvalidInputError(
                    f"{path}:{line_no}: label {raw_label!r} not in the known classes {names}"
                )
            names.append(raw_label)
        labels.append(names.index(raw_label))
        values = []
        for j, cell in enumerate(row):
            if j == label_idx:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise InvalidInputError(
                    f"{path}:{line_no}: non-numeric feature {cell!r} in column {j}"
                ) from None
        feats.append(values)
    x = np.array(feats, dtype=float)
    y = _one_hot(np.array(labels), len(names))
    return Dataset(x=x, y=y, class_names=names)


def write_csv(dataset, path):
    """Write a dataset as ``f0..f{m-1},label`` with round-trippable floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = dataset.class_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(dataset.n_features)] + ["label"])
        for row, label in zip(dataset.x, dataset.labels):
            text = [FLOAT_FMT % v for v in row]
            text.append(names[label] if names else str(int(label)))
            writer.writerow(text)
    return path


@dataclass(frozen=True)
class FeatureStandardizer:
    """Per-feature center/scale learned on one dataset, applicable to another."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, dataset):
        return Dataset(
            x=(dataset.x - self.mean) / self.scale,
            y=dataset.y,
            class_names=dataset.class_names,
            tensor_shape=dataset.tensor_shape,
        )


def standardize(dataset):
    """Center each feature column and scale it to unit standard deviation.

    Zero-variance columns are centered only (scale recorded as 1).  Returns
    the transformed dataset and the fitted transform for held-out data.
    """
    if dataset.n < 2:
        raise InvalidInputError("standardize needs at least 2 rows")
    mean = dataset.x.mean(axis=0)
    std = dataset.x.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)
    transform = FeatureStandardizer(mean=mean, scale=scale)
    return transform.apply(dataset), transform


@dataclass(frozen=True)
class SplitSpec:
    """Stratified fraction split, or explicit index lists; seeded shuffling."""

    train_fraction: float = None
    train_indices: tuple = None
    test_indices: tuple = None
    seed: int = 0

    def __post_init__(self):
        explicit = self.train_indices is not None or self.test_indices is not None
        if explicit:
            if self.train_indices is None or self.test_indices is None:
                raise InvalidInputError("explicit split needs both index lists")
            if self.train_fraction is not None:
                raise InvalidInputError("give a fraction or index lists, not both")
        elif self.train_fraction is None:
            raise InvalidInputError("give a fraction or index lists")
        elif not 0.0 < self.train_fraction < 1.0:
            raise InvalidInputError("train_fraction must be in (0, 1)")


def _subset(dataset, idx):
    return Dataset(
        x=dataset.x[idx],
        y=dataset.y[idx],
        class_names=dataset.class_names,
        tensor_shape=dataset.tensor_shape,
    )


def split(dataset, spec):
    """Split into (train, test); fractions stratify per class, rounded."""
    n = dataset.n
    if spec.train_indices is not None:
        train_idx = np.asarray(spec.train_indices, dtype=int)
        test_idx = np.asarray(spec.test_indices, dtype=int)
        both = np.concatenate([train_idx, test_idx])
        if both.size and (both.min() < 0 or both.max() >= n):
            raise InvalidInputError("split indices out of range")
        if np.intersect1d(train_idx, test_idx).size:
            raise InvalidInputError("train and test indices overlap")
        return _subset(dataset, train_idx), _subset(dataset, test_idx)

    rng = np.random.default_rng(spec.seed)
    labels = dataset.labels
    train_parts, test_parts = [], []
    for k in range(dataset.n_classes):
        members = np.flatnonzero(labels == k)
        if members.size < 2:
            raise InvalidInputError(
                f"class {k} has {members.size} sample(s); stratified split needs >= 2"
            )
        order = rng.permutation(members)
        k_train = int(np.floor(spec.train_fraction * members.size + 0.5))
        k_train = min(max(k_train, 1), members.size - 1)
        train_parts.append(order[:k_train])
        test_parts.append(order[k_train:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return _subset(dataset, train_idx), _subset(dataset, test_idx)


def gen_synthetic_lowrank(n_per_class, c, m, joint_rank, noise_sigma, seed):
    """Low-rank class mixture: latents near class means mixed into m features.

    Class means are standard normal in the ``joint_rank``-dimensional
    latent space; each sample's latent is its class mean plus
    ``0.3 * standard normal``; rows are ``latent @ B`` for a fixed seeded
    ``joint_rank x m`` mixing matrix plus ``noise_sigma * standard normal``.
    With ``noise_sigma = 0`` the design matrix has numerical rank
    ``joint_rank``.  Samples are grouped by class, class k first.
    """
    if joint_rank >= min(m, c * n_per_class):
        raise InvalidInputError("joint_rank must be < min(m, c * n_per_class)")
    if joint_rank < 1 or n_per_class < 1 or c < 2:
        raise InvalidInputError("need joint_rank >= 1, n_per_class >= 1, c >= 2")
    if noise_sigma < 0:
        raise InvalidInputError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    mixing = rng.standard_normal((joint_rank, m))
    means = rng.standard_normal((c, joint_rank))
    blocks, labels = [], []
    for k in range(c):
        latents = means[k] + 0.3 * rng.standard_normal((n_per_class, joint_rank))
        block = latents @ mixing
        if noise_sigma > 0:
            block = block + noise_sigma * rng.standard_normal((n_per_class, m))
        blocks.append(block)
        labels.extend([k] * n_per_class)
    x = np.vstack(blocks)
    y = _one_hot(np.array(labels), c)
    return Dataset(x=x, y=y)


def gen_synthetic_split(train_per_class, test_per_class, c, m, joint_rank,
                        noise_sigma, seed):
    """Train/test datasets drawn from one synthetic low-rank mixture.

    Draws ``train_per_class + test_per_class`` samples per class from a
    single generator call (same mixing matrix and class means throughout)
    and splits each class block by position.
    """
    per_class = train_per_class + test_per_class
    full = gen_synthetic_lowrank(per_class, c, m, joint_rank, noise_sigma, seed)
    train_idx, test_idx = [], []
    for k in range(c):
        start = k * per_class
        train_idx.extend(range(start, start + train_per_class))
        test_idx.extend(range(start + train_per_class, start + per_class))
    spec = SplitSpec(train_indices=tuple(train_idx), test_indices=tuple(test_idx))
    return split(full, spec)


def export_features(features, labels, path):
    """Write a feature matrix and integer labels as ``f0..f{k-1},label``.

    Floats carry 17 significant digits, so a reload reproduces them exactly.
    An empty feature matrix produces a header-only file.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if features.ndim != 2:
        raise InvalidInputError("features must be 2-D")
    if features.shape[0] != labels.shape[0]:
        raise InvalidInputError("feature and label row counts disagree")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(features.shape[1])] + ["label"])
        for row, label in zip(features, labels):
            writer.writerow([FLOAT_FMT % v for v in row] + [str(int(label))])
    return path
