#pragma once

#include <functional>

namespace varsr {

// Settings shared by every constant-marginalization integral.
struct QuadratureScheme {
  double rel_tol = 1e-9;
  double abs_tol = 0.0;
  double window_sigmas = 12.0;  // half-width of the integration window, in
                                // standard deviations of the local normal
  int initial_panels = 16;
  int max_panels = 4000;
  int max_constants = 2;  // nesting depth limit
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // accumulated error estimate
  bool converged = false;
  long evaluations = 0;
};

// Globally adaptive Gauss-Kronrod 7/15 on [a, b]: the initial panels are
// refined worst-first until the summed error estimate meets
// max(abs_tol, rel_tol * |integral|) or the panel budget runs out.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double rel_tol, double abs_tol = 0.0, int initial_panels = 16,
                     int max_panels = 4000);

}  // namespace varsr
