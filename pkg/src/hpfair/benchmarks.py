"""Synthetic datasets with a known fairness lever.

:func:`planted_bias` builds a binary task whose clean labels follow one linear
boundary for both protected groups, but a share of the minority group's labels
is flipped at random. A fully grown tree memorizes those flips, so its
minority predictions are noisy and its true-positive rates differ between the
groups. Larger leaves (``min_weight_fraction_leaf``) average the flips away,
which raises accuracy and closes the gap at the same time. Leaf-size limits in
samples (``min_samples_leaf`` tops out at 64) are too small to do the same job
at the default size.
"""

import numpy as np

from .data import Dataset


def planted_bias(
    n_rows=6000,
    seed=0,
    minority_share=0.5,
    majority_flip=0.0,
    minority_flip=0.25,
    n_noise=2,
):
    """Generate the planted-bias benchmark.

    Parameters
    ----------
    n_rows : int
    seed : int
    minority_share : float
        Probability that a row belongs to group 1.
    majority_flip, minority_flip : float
        Probability that a row's label is flipped, per group.
    n_noise : int
        Extra standard-normal features with no signal.

    Returns
    -------
    Dataset
        Features ``signal_1``, ``signal_2``, ``noise_1..k`` and ``group``;
        favorable label 1; group 1 carries the label noise.
    """
    rng = np.random.default_rng(seed)
    group = (rng.random(n_rows) < minority_share).astype(np.int64)
    signal = rng.normal(size=(n_rows, 2))
    y = (signal.sum(axis=1) > 0).astype(np.int64)
    flip = rng.random(n_rows) < np.where(group == 1, minority_flip, majority_flip)
    y = np.where(flip, 1 - y, y)
    noise = rng.normal(size=(n_rows, n_noise))
    X = np.column_stack([signal, noise, group.astype(np.float64)])
    names = ["signal_1", "signal_2"] + [f"noise_{i + 1}" for i in range(n_noise)] + ["group"]
    return Dataset(
        X=X,
        y=y,
        protected=group,
        feature_names=names,
        group_names=["majority", "minority"],
        favorable_label=1,
        categories={"group": ["majority", "minority"]},
    )
