"""Small ConvNet laboratory: SGD and greedy random search on MNIST-style data.

Subpackages and modules:

- ``evolab.nn``: the ConvNet engine (architecture, forward, exact backprop).
- ``evolab.data``: IDX ingestion, batching with class occlusion, corruption.
- ``evolab.optim``: SGD and the fixed-population greedy random search.
- ``evolab.mathx``: special functions and statistics (incomplete beta,
  hypersphere caps, Kolmogorov-Smirnov, ranked-fitness transition model).
- ``evolab.landscape``: the experiment procedures (flatness sweeps, angle
  studies, mutation sweeps, transfer runs, robustness tables).
- ``evolab.cli``: command-line front end emitting CSV/SVG reports.
"""

__version__ = "0.1.0"
