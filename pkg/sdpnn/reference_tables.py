"""Published reference numbers for the benchmark tables.

Every value carries a ``source`` string saying which published table or
appendix list it came from. Nothing else in the package hard-codes these.
"""

DATASET_DIMS = {
    # name: (train instances, input features, output features, variables, constraints)
    "source": "published dataset summary table",
    "random": (25, 2, 5, 3249, 8999),
    "spiral": (60, 2, 3, 15625, 45651),
    "iris": (75, 4, 3, 24649, 71799),
    "ionosphere": (175, 34, 2, 148996, 420493),
    "pima": (383, 8, 2, 602176, 1791109),
    "banknotes": (685, 4, 2, 1893376, 5663653),
    "mnist": (1000, 20, 10, 4120900, 12743300),
}

AR_WIDTHS = (5, 10, 100, 200, 300)

# SGD losses per width, SDP-NN objective, AR (%), runtime (s); "std" where averaged
APPROX_RATIO = {
    "source": "published approximation-ratio table",
    ("random", 0.1): {
        "sgd": {5: 18.27, 10: 8.60, 100: 8.09, 200: 8.09, 300: 8.09},
        "sgd_std": {5: 5.76, 10: 1.16, 100: 1.04, 200: 1.04, 300: 1.04},
        "sdp": 7.28, "sdp_std": 0.98, "ar": 89.93, "runtime": 11.46,
    },
    ("random", 0.01): {
        "sgd": {5: 11.78, 10: 1.32, 100: 0.94, 200: 0.94, 300: 0.94},
        "sgd_std": {5: 5.53, 10: 0.25, 100: 0.12, 200: 0.12, 300: 0.12},
        "sdp": 0.76, "sdp_std": 0.10, "ar": 80.66, "runtime": 14.85,
    },
    ("spiral", 0.1): {
        "sgd": {5: 16.64, 10: 16.59, 100: 16.59, 200: 16.59, 300: 16.59},
        "sdp": 16.24, "ar": 97.84, "runtime": 1566.65,
    },
    ("spiral", 0.01): {
        "sgd": {5: 15.56, 10: 15.21, 100: 15.16, 200: 15.16, 300: 15.16},
        "sdp": 11.66, "ar": 76.90, "runtime": 923.83,
    },
}

PREDICTION_DATASETS = ("iris", "ionosphere", "pima", "banknotes", "mnist")

# (method, dataset, gamma) -> (weighted F1, accuracy)
PREDICTION = {
    "source": "published prediction-quality table",
    ("sgd", "iris", 0.1): (0.96, 0.960),
    ("sgd", "iris", 0.01): (0.987, 0.987),
    ("sgd", "ionosphere", 0.1): (0.915, 0.891),
    ("sgd", "ionosphere", 0.01): (0.898, 0.88),
    ("sgd", "pima", 0.1): (0.626, 0.583),
    ("sgd", "pima", 0.01): (0.594, 0.557),
    ("sgd", "banknotes", 0.1): (0.993, 0.988),
    ("sgd", "banknotes", 0.01): (0.992, 0.985),
    ("sgd", "mnist", 0.1): (0.880, 0.818),
    ("sgd", "mnist", 0.01): (0.863, 0.796),
    ("sdp", "iris", 0.1): (0.987, 0.987),
    ("sdp", "iris", 0.01): (0.987, 0.987),
    ("sdp", "ionosphere", 0.1): (0.924, 0.920),
    ("sdp", "ionosphere", 0.01): (0.927, 0.909),
    ("sdp", "pima", 0.1): (0.679, 0.646),
    ("sdp", "pima", 0.01): (0.703, 0.625),
    ("sdp", "banknotes", 0.1): (0.930, 0.860),
    ("sdp", "banknotes", 0.01): (0.893, 0.767),
    ("sdp", "mnist", 0.1): (0.862, 0.794),
    ("sdp", "mnist", 0.01): (0.849, 0.778),
    ("sdp-bias", "iris", 0.1): (0.946, 0.947),
    ("sdp-bias", "iris", 0.01): (1.000, 1.000),
    ("sdp-bias", "ionosphere", 0.1): (0.912, 0.909),
    ("sdp-bias", "ionosphere", 0.01): (0.921, 0.914),
    ("sdp-bias", "pima", 0.1): (0.714, 0.672),
    ("sdp-bias", "pima", 0.01): (0.744, 0.703),
    ("sdp-bias", "banknotes", 0.1): (0.991, 0.991),
    ("sdp-bias", "banknotes", 0.01): (0.985, 0.980),
    ("sdp-bias", "mnist", 0.1): (0.858, 0.791),
    ("sdp-bias", "mnist", 0.01): (0.838, 0.76),
}

PREDICTION_RUNTIME = {
    "source": "published prediction-quality table, runtime rows",
    ("iris", 0.1): 39, ("iris", 0.01): 171,
    ("ionosphere", 0.1): 4416, ("ionosphere", 0.01): 8150,
    ("pima", 0.1): 12256, ("pima", 0.01): 13564,
    ("banknotes", 0.1): 102919, ("banknotes", 0.01): 101952,
    ("mnist", 0.1): 66157, ("mnist", 0.01): 155810,
}

# dataset -> {gamma or None: (lr, iterations)}; None applies to every gamma
SGD_PRESETS = {
    "source": "published SGD implementation details",
    "random": {None: (1e-5, 500_000)},
    "spiral": {None: (1e-3, 8_000)},
    "iris": {None: (1e-6, 2_000_000)},
    "ionosphere": {0.1: (1e-6, 2_000_000), 0.01: (1e-6, 5_000_000)},
    "pima": {0.1: (1e-8, 5_000_000), 0.01: (1e-8, 6_000_000)},
    "banknotes": {None: (1e-6, 5_000_000)},
    "mnist": {None: (1e-7, 8_000_000)},
}

PUBLISHED_GAMMAS = (0.1, 0.01)


def sgd_preset(dataset, gamma):
    """(lr, iters) published for ``dataset`` at ``gamma``, or None if unlisted."""
    entry = SGD_PRESETS.get(str(dataset).lower())
    if not entry:
        return None
    return entry.get(gamma, entry.get(None))


def approx_ratio_reference(dataset, gamma):
    return APPROX_RATIO.get((str(dataset).lower(), gamma))


def prediction_reference(method, dataset, gamma):
    return PREDICTION.get((method, str(dataset).lower(), gamma))


def prediction_runtime_reference(dataset, gamma):
    """Published SDP-NN solve time in seconds, or None if unlisted."""
    return PREDICTION_RUNTIME.get((str(dataset).lower(), gamma))
