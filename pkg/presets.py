# presets.py

presets_data = {
    "exact_check": {
        "spectrum": {
            "eta_max_sq_over_omega_a": 0.07,
            "omega0_over_omega_a": 1.0,
            "t_c_over_inv_omega_a": 10.0,
        },
        "temperature": {"alpha_system": float("inf"), "alpha_bath": float("inf")},
        "engine": {
            "kind": "exact",
            "n_modes": 40,
            "coverage_over_gamma": 5.0,
            "max_quanta": 2,
            "parity_sector": True,
            "finite_measurements": False,
        },
        "schedule": {
            "count": 10,
            "interval_over_inv_omega_a": 2.0,
            "pre_relax_over_t_c": 3.0,
            "duration_over_inv_omega_a": 0.11,
        },
        "run": {
            "horizon_over_inv_omega_a": 50.0,
            "sample_step_over_inv_omega_a": 0.1,
            "mode_sample_step_over_inv_omega_a": 1.0,
        },
    },
    "purity_scan": {
        "spectrum": {
            "eta_max_sq_over_omega_a": 0.01,
            "omega0_over_omega_a": 2.0,
            "t_c_over_inv_omega_a": 2.0,
        },
        "equilibrium": {
            # 41 log-spaced points over [0.05, 50]
            "alphas": [round(0.05 * 1000.0 ** (k / 40), 10) for k in range(41)],
            "form": "ratio",
        },
    },
    "cooling_sweep": {
        "spectrum": {
            "eta_max_sq_over_omega_a": 4.36,
            "omega0_over_omega_a": 1.0 / 0.7,
            "t_c_over_inv_omega_a": 10.0,
        },
        "temperature": {"alpha_system": 1.0, "alpha_bath": 1.0},
        "engine": {"kind": "me"},
        "objective": {
            "direction": "cool",
            "count": 10,
            "dt_min_over_inv_omega_a": 0.05,
            "dt_max_over_inv_omega_a": 20.0,
            "grid_points": 400,
        },
        "sweep": {"alphas": [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]},
    },
}
