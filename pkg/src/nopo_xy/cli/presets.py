"""Named experiment presets in the flat key schema of experiment files.

Rates are in Hz and times in seconds. Presets run at desk scale unless
``--paper-scale`` asks for the full-size runs.
"""

GAMMA_INJ_SETUP = 13.6e3
D_THETA_SETUP = 0.44e3
BETA_GRID = [2.8, 5.7, 15.0, 31.0]
ACQUISITION_TIMES = [1e-3, 10e-3, 100e-3, 1.0]

# phase-diffusion decay of free-running oscillators, four diffusion strengths
FREE_DECAY = {
    "model": "kuramoto",
    "rates.gamma_inj": 0.0,
    "sweep.d_theta": [0.44e3, 1e3, 2e3, 4e3],
    "acquisition.t_a": [i * 0.25e-3 for i in range(25)],
}

# equilibrium relative-phase distributions at the longest acquisition time
EQUILIBRIUM = {
    "model": "kuramoto",
    "rates.gamma_inj": GAMMA_INJ_SETUP,
    "sweep.beta_set": BETA_GRID,
    "acquisition.t_a": [1.0],
}

# beta_eff against acquisition time, beta_set varied through the diffusion
CONVERGENCE_BY_DIFFUSION = {
    "model": "kuramoto",
    "rates.gamma_inj": GAMMA_INJ_SETUP,
    "sweep.beta_set": BETA_GRID,
    "acquisition.t_a": ACQUISITION_TIMES,
}

# same grid, beta_set varied through the injection rate at fixed diffusion
CONVERGENCE_BY_RATE = {
    "model": "kuramoto",
    "rates.d_theta": D_THETA_SETUP,
    "sweep.beta_set": BETA_GRID,
    "acquisition.t_a": ACQUISITION_TIMES,
}

TRIVIAL = {
    "model": "kuramoto",
    "rates.gamma_inj": 0.0,
    "rates.d_theta": D_THETA_SETUP,
    "acquisition.t_a": ACQUISITION_TIMES,
}

PRESETS = {
    "free-decay": FREE_DECAY,
    "equilibrium": EQUILIBRIUM,
    "convergence": CONVERGENCE_BY_DIFFUSION,
    "convergence-by-rate": CONVERGENCE_BY_RATE,
    "trivial": TRIVIAL,
}
