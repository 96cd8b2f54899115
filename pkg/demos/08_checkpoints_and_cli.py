"""
Checkpoints and the command line
================================

Trains briefly, saves the online and teacher weights, reloads them and
recomputes the embeddings bit for bit. The same flow is available as
``armac3 gen-sbm`` / ``armac3 train`` / ``armac3 eval``.
"""
import warnings

import numpy as np

from armac3 import RunConfig, build_graph, gen_sbm, train_unsupervised
from armac3.cli import main
from armac3.pipeline import evaluate_checkpoint

warnings.simplefilter("ignore", RuntimeWarning)
fm, labels = gen_sbm(60, 2, 0.5, 0.05, 10, 0.3, seed=7)
res = train_unsupervised(build_graph(fm.values, 0.5), fm.values, RunConfig(epochs=50), checkpoint_path="demo.armac3")
_, h, S = evaluate_checkpoint("demo.armac3", fm.values, labels)
print("reloaded embeddings identical:", np.array_equal(h, res.h), np.array_equal(S, res.S))
print("container starts with:", open("demo.armac3", "rb").read(6))

main(["gen-sbm", "--seed", "7"])
main(["train", "--features", "sbm_features.csv", "--labels", "sbm_labels.txt", "--epochs", "50", "--runs", "3"])
main(["eval", "--checkpoint", "model.armac3", "--features", "sbm_features.csv", "--labels", "sbm_labels.txt"])
