#pragma once

// Every numerical tolerance and threshold used by the property checks,
// the acceptance suite and the CLI lives here.

namespace fluxsolve::tol {

// Mesh geometry.
inline constexpr double normal_unit = 1e-12;
inline constexpr double volume_sum_rel = 1e-12;

// Conservation of FVM and FluxGNN updates.
inline constexpr double fvm_step_drift_rel = 1e-13;
inline constexpr double fvm_ten_step_drift_rel = 1e-12;
inline constexpr double run_conservation_abs = 1e-10;
inline constexpr double conservation_error_abs = 1e-7;
inline constexpr double graph_conservation_drift_rel = 1e-12;
inline constexpr double roundtrip_rel = 1e-10;
inline constexpr double flux_symmetry_abs = 1e-12;
inline constexpr double bb_conservation_rel = 1e-10;
inline constexpr double decoder_identity_rel = 1e-10;

// Equivalence with the FVM blended scheme when every gate is one.
inline constexpr double fvm_equivalence_abs = 1e-12;

// Equivariance.
inline constexpr double scaling_invariance_rel = 1e-10;
inline constexpr double mlp_input_invariance_rel = 1e-12;
inline constexpr double reflection_invariance_abs = 1e-10;
inline constexpr double en_equivariance_abs = 1e-10;

// Gradient checking: relative error |a - b| / max(|a|, |b|, floor).
inline constexpr double gradcheck_step = 1e-6;
inline constexpr double gradcheck_rel = 1e-5;
inline constexpr double gradcheck_floor = 1e-3;
inline constexpr double gradcheck_flag = 1e-2;

// Decoder construction refuses encoders with norm below this.
inline constexpr double encoder_min_norm = 1e-12;

// Barzilai-Borwein step.
inline constexpr double bb_min_denominator = 1e-30;
inline constexpr double bb_alpha_min = 1e-3;
inline constexpr double bb_alpha_max = 1e3;

// Convergence study acceptance.
inline constexpr double convergence_rel_band = 0.30;
inline constexpr double convergence_slope_min = 0.8;
inline constexpr double convergence_slope_max = 2.2;
inline constexpr double convergence_courant = 0.2;

// Learning gain: trained MSE must be at most this fraction of the FVM baseline.
inline constexpr double learning_gain_ratio = 0.1;

// Courant number above which run_fvm warns.
inline constexpr double courant_warn = 1.0;

}  // namespace fluxsolve::tol
