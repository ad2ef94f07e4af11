#pragma once

#include "pcapce/types.hpp"

namespace pcapce {

/// Geometry and material of a tubular steel pile plus the Winkler-spring
/// calibration constants. Lengths in m, moduli in kPa, loads in kN.
struct PileConfig {
  double diameter = 2.0;
  double embedded_length = 10.5;
  double wall_thickness = 0.025;
  double youngs_modulus = 2.0e8;
  double load_height = 10.0;
  int n_nodes = 101;
  double subgrade_constant = 0.2;   // kappa in k(z) = kappa G0 sqrt(K0) (30/OCR)^(1/4) (0.3 + z/L)
  double degradation = 50.0;        // secant softening k / (1 + c |y| / D)
  double stage_tolerance = 1e-6;    // m, on the mudline displacement
  int max_picard_iterations = 200;
  double picard_tolerance = 1e-8;   // m, on max |dy| between iterates

  void validate() const;
  double bending_stiffness() const;  // EI, kN m^2
  double node_spacing() const { return embedded_length / (n_nodes - 1); }
  Vector depths() const;
};

struct SoilInputs {
  double G0 = 0.0;   // kPa
  double K0 = 0.0;
  double OCR = 0.0;

  static SoilInputs from(const Eigen::Ref<const Vector>& x);
};

struct DeflectionProfile {
  Vector y;           // lateral displacement at each node, m
  double load = 0.0;  // applied horizontal load H, kN
  int iterations = 0; // Picard iterations (or bisection steps for a stage solve)
};

/// Subgrade modulus k(z_i) at every node, kPa.
Vector subgrade_profile(const SoilInputs& soil, const PileConfig& cfg);

/// Euler-Bernoulli beam on linear springs k(z) D, loaded at the mudline by
/// shear H and moment H h; free toe.
DeflectionProfile solve_linear(const Vector& k, double H, const PileConfig& cfg);

/// Same beam with secant-degrading springs, solved by Picard iteration from
/// the linear solution.
DeflectionProfile solve_nonlinear(const SoilInputs& soil, double H, const PileConfig& cfg);

/// Finds the load that drives the mudline displacement to v_G.
DeflectionProfile solve_stage(const SoilInputs& soil, double v_G, const PileConfig& cfg);

struct EnsembleResult {
  Matrix profiles;  // K x n_nodes
  Vector loads;     // K
};

/// solve_stage for every row of X = (G0, K0, OCR); row order is preserved.
EnsembleResult run_ensemble(const Matrix& X, double v_G, const PileConfig& cfg);

}  // namespace pcapce
