"""Pool-based active learning with sinusoidal, performance-adaptive strategy fusion.

Modules
-------
data
    Datasets, stratified splits and pool bookkeeping.
learner
    Dropout MLP supplying probabilities, MC-dropout stacks and embeddings.
strategies
    Entropy, margin, BALD, BADGE, CoreSet and random selection.
controller
    Sinusoidal priors, performance traces, fusion and budget apportionment.
harness
    The active-learning loop and experiment matrix.
stats
    Metrics, paired t-test and aggregation.
kernels
    Distance kernels (compiled when available, numpy otherwise).
"""

__version__ = "0.1.0"
