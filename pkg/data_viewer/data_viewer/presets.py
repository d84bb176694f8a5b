# Experiment tables the viewer knows how to plot: (x column, value column, label)
EXPERIMENT_PRESETS = {
    "fig1": ("n", "size", "Inputs needed for structural controllability"),
    "fig2": ("k", "error", "Convergence error of the selected inputs"),
    "scaling": ("n", "queries", "Independence queries of the minimum input set"),
}

NETWORK_PRESETS = [
    {"name": "small consensus", "n": 12, "degree": 3.0, "kind": "consensus"},
    {"name": "sparse consensus", "n": 20, "degree": 2.0, "kind": "consensus"},
    {"name": "free network", "n": 15, "degree": 2.0, "kind": "free"},
    {"name": "double integrator", "n": 10, "degree": 2.0, "kind": "double"},
]
