#pragma once

namespace fluxsolve {

// Closed-form periodic convection-diffusion solution on the unit interval:
// u_amp exp(-(2 pi)^2 D t) cos(2 pi (x - c t + x0)).
double exact_solution(double t, double x, double c, double D, double u_amp, double x0);

}  // namespace fluxsolve
