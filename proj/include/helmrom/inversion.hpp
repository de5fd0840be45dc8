#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "helmrom/rom.hpp"

namespace helmrom {

/// Coarse rectangular parameter grid over the mesh bounding box. Each
/// triangle maps to the cell containing its centroid; the contrast is one
/// real value per coarse cell.
struct ParamGrid {
  int nx = 0;
  int ny = 0;
  double x0 = 0.0, y0 = 0.0, width = 0.0, height = 0.0;
  std::vector<std::uint32_t> cell_of_tri;
  std::vector<double> cell_areas_;  // summed triangle areas per cell

  static ParamGrid create(const Mesh& mesh, int nx, int ny);

  std::size_t cell_count() const { return static_cast<std::size_t>(nx) * ny; }
  const std::vector<double>& cell_areas() const { return cell_areas_; }
  /// Expands cell values to a piecewise-per-triangle field.
  CoefficientField field(const RVec& values) const;
  /// Cell index containing point (x, y) (clamped to the grid).
  std::size_t locate(double x, double y) const;
  std::string fingerprint() const;
};

/// Everything an objective evaluation needs: forward discretization,
/// acquisition, reference data, and regularization parameters.
struct ObjectiveConfig {
  enum class Kind { Rom, Fwi };

  ObjectiveConfig(Kind kind, std::shared_ptr<const SparseComplexSystem> system,
                  WavenumberGrid grid, SourceSet sources, ParamGrid param);

  Kind kind;
  std::shared_ptr<const SparseComplexSystem> system;
  WavenumberGrid grid;
  SourceSet sources;
  ParamGrid param;

  double a = 0.0;  // regularization weight
  /// Lebesgue exponent, > 2. infinity() switches to box-constraint mode:
  /// no penalty term, projection clamps |q| <= box_bound.
  double p = 4.0;
  double box_bound = 1.0;
  double floor_delta = 0.0;  // projection floor q >= -1 + floor_delta
  int threads = 1;

  std::vector<CMat> observed_stiffness;  // rom kind: N*N blocks
  std::vector<CMat> observed_E;          // fwi kind: N matrices of M x M
};

/// Data-misfit terms (no penalty).
double rom_misfit(const RVec& q, const ObjectiveConfig& cfg);
double fwi_misfit(const RVec& q, const ObjectiveConfig& cfg);

/// Area-weighted discrete penalty a * (sum_c area_c |q_c|^p)^(1/p);
/// zero in box mode (p = infinity).
double penalty(const RVec& q, const ObjectiveConfig& cfg);
RVec penalty_gradient(const RVec& q, const ObjectiveConfig& cfg);

struct ObjectiveValue {
  double misfit = 0.0;
  double penalty = 0.0;
  double total() const { return misfit + penalty; }
};

/// Misfit plus penalty, dispatching on cfg.kind.
ObjectiveValue objective_parts(const RVec& q, const ObjectiveConfig& cfg);
double objective(const RVec& q, const ObjectiveConfig& cfg);

/// Central finite differences of an arbitrary scalar functional.
RVec gradient_fd(const std::function<double(const RVec&)>& phi, const RVec& q, double h);

/// Adjoint-state gradient of the FWI objective (misfit plus analytic
/// penalty gradient). Exploits source/receiver collocation and the
/// complex-symmetric system, so the adjoint states are combinations of
/// the forward snapshots.
RVec fwi_adjoint_gradient(const RVec& q, const ObjectiveConfig& cfg);

/// Cellwise projection onto the admissible set: q >= -1 + floor_delta,
/// plus |q| <= box_bound in box mode. Idempotent.
RVec project_admissible(const RVec& q, const ObjectiveConfig& cfg);
RVec project_admissible(const RVec& q, double floor_delta = 0.0);

struct MinimizeOptions {
  int max_iter = 100;
  double grad_tol = 1e-8;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 30;
  double step_init = 1.0;
  double fd_step = 1e-5;  // used when the gradient falls back to FD
};

struct InversionResult {
  RVec q_est;
  std::vector<double> objective_history;  // accepted values, starts at q0
  std::vector<double> misfit_history;
  std::vector<double> pgrad_norm_history;
  std::vector<double> step_history;       // accepted step lengths
  int iterations = 0;
  std::string termination;  // gradient_tolerance | max_iterations | stalled
};

/// Projected gradient descent with Armijo backtracking. FWI uses the
/// adjoint gradient, ROM central finite differences. Accepted iterates
/// stay admissible and the objective history is non-increasing.
InversionResult minimize(const ObjectiveConfig& cfg, const RVec& q0,
                         const MinimizeOptions& opts = {});

}  // namespace helmrom
