#include "helmrom/inversion.hpp"

#include <algorithm>
#include <cmath>

#include "helmrom/errors.hpp"
#include "helmrom/solver.hpp"

namespace helmrom {

ParamGrid ParamGrid::create(const Mesh& mesh, int nx, int ny) {
  if (nx < 1 || ny < 1) throw InvalidArgumentError("ParamGrid: nx and ny must be >= 1");
  ParamGrid g;
  g.nx = nx;
  g.ny = ny;
  double xmax = -std::numeric_limits<double>::infinity(), ymax = xmax;
  g.x0 = std::numeric_limits<double>::infinity();
  g.y0 = g.x0;
  for (const auto& v : mesh.vertices) {
    g.x0 = std::min(g.x0, v.x);
    g.y0 = std::min(g.y0, v.y);
    xmax = std::max(xmax, v.x);
    ymax = std::max(ymax, v.y);
  }
  g.width = xmax - g.x0;
  g.height = ymax - g.y0;
  if (!(g.width > 0.0) || !(g.height > 0.0))
    throw InvalidArgumentError("ParamGrid: degenerate mesh bounding box");
  g.cell_of_tri.resize(mesh.triangle_count());
  g.cell_areas_.assign(g.cell_count(), 0.0);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    Vec2 c = mesh.centroid(t);
    std::size_t cell = g.locate(c.x, c.y);
    g.cell_of_tri[t] = static_cast<std::uint32_t>(cell);
    g.cell_areas_[cell] += mesh.triangle_area(t);
  }
  return g;
}

std::size_t ParamGrid::locate(double x, double y) const {
  int ix = static_cast<int>(std::floor((x - x0) / width * nx));
  int iy = static_cast<int>(std::floor((y - y0) / height * ny));
  ix = std::clamp(ix, 0, nx - 1);
  iy = std::clamp(iy, 0, ny - 1);
  return static_cast<std::size_t>(iy) * nx + ix;
}

CoefficientField ParamGrid::field(const RVec& values) const {
  if (static_cast<std::size_t>(values.size()) != cell_count())
    throw InvalidArgumentError("ParamGrid::field: value count mismatch");
  std::vector<double> per_tri(cell_of_tri.size());
  for (std::size_t t = 0; t < cell_of_tri.size(); ++t) per_tri[t] = values[cell_of_tri[t]];
  return CoefficientField::piecewise(std::move(per_tri));
}

std::string ParamGrid::fingerprint() const {
  Fnv1a h;
  h.add_u64(static_cast<std::uint64_t>(nx));
  h.add_u64(static_cast<std::uint64_t>(ny));
  h.add_f64(x0);
  h.add_f64(y0);
  h.add_f64(width);
  h.add_f64(height);
  for (auto c : cell_of_tri) h.add_u64(c);
  return h.hex();
}

ObjectiveConfig::ObjectiveConfig(Kind kind_, std::shared_ptr<const SparseComplexSystem> system_,
                                 WavenumberGrid grid_, SourceSet sources_, ParamGrid param_)
    : kind(kind_),
      system(std::move(system_)),
      grid(std::move(grid_)),
      sources(std::move(sources_)),
      param(std::move(param_)) {
  if (!system) throw InvalidArgumentError("ObjectiveConfig: null system");
  if (param.cell_of_tri.size() != system->space().mesh().triangle_count())
    throw InvalidArgumentError("ObjectiveConfig: parameter grid built on a different mesh");
}

namespace {

bool box_mode(const ObjectiveConfig& cfg) { return std::isinf(cfg.p); }

void check_objective_inputs(const RVec& q, const ObjectiveConfig& cfg) {
  if (static_cast<std::size_t>(q.size()) != cfg.param.cell_count())
    throw InvalidArgumentError("objective: parameter vector size mismatch");
  if (cfg.a < 0.0) throw InvalidArgumentError("objective: penalty weight must be >= 0");
  if (!(cfg.p > 2.0)) throw InvalidArgumentError("objective: exponent p must exceed 2");
}

/// Direct-solve snapshots at trial q for all (k_i, source s).
std::vector<CVec> forward_snapshots(const RVec& q, const ObjectiveConfig& cfg) {
  CoefficientField field = cfg.param.field(q);
  const std::size_t N = cfg.grid.size(), M = cfg.sources.size();
  std::vector<CVec> u(N * M);
  for (std::size_t i = 0; i < N; ++i) {
    try {
      // Factorize directly instead of through the system cache: every trial
      // contrast is distinct, so cached factorizations would accumulate over
      // the whole inversion without ever being reused.
      auto fact = lu_factorize(cfg.system->system_matrix(cfg.grid[i], field));
      for (std::size_t s = 0; s < M; ++s) u[i * M + s] = fact->solve(cfg.sources.loads[s]);
    } catch (const std::runtime_error& e) {
      throw ObjectiveEvaluationError("forward solve failed at k=" + format_g17(cfg.grid[i]) +
                                     ": " + e.what());
    }
  }
  return u;
}

}  // namespace

double rom_misfit(const RVec& q, const ObjectiveConfig& cfg) {
  check_objective_inputs(q, cfg);
  const std::size_t N = cfg.grid.size(), M = cfg.sources.size();
  if (cfg.observed_stiffness.size() != N * N)
    throw InvalidArgumentError("rom_misfit: observed stiffness block count mismatch");
  std::vector<CVec> u = forward_snapshots(q, cfg);
  std::vector<CVec> Su(N * M);
  for (std::size_t a = 0; a < N * M; ++a) Su[a] = cfg.system->stiffness() * u[a];
  double sum = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      const CMat& obs = cfg.observed_stiffness[i * N + j];
      for (std::size_t r = 0; r < M; ++r)
        for (std::size_t s = 0; s < M; ++s)
          sum += std::norm(u[j * M + r].dot(Su[i * M + s]) - obs(r, s));
    }
  return 0.5 * sum;
}

double fwi_misfit(const RVec& q, const ObjectiveConfig& cfg) {
  check_objective_inputs(q, cfg);
  const std::size_t N = cfg.grid.size(), M = cfg.sources.size();
  if (cfg.observed_E.size() != N) throw InvalidArgumentError("fwi_misfit: observed E count mismatch");
  std::vector<CVec> u = forward_snapshots(q, cfg);
  double sum = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t r = 0; r < M; ++r)
      for (std::size_t s = 0; s < M; ++s)
        sum += std::norm(cfg.sources.loads[r].dot(u[i * M + s].conjugate()) -
                         cfg.observed_E[i](r, s));
  return 0.5 * sum;
}

double penalty(const RVec& q, const ObjectiveConfig& cfg) {
  if (cfg.a == 0.0 || box_mode(cfg)) return 0.0;
  const auto& w = cfg.param.cell_areas();
  double sum = 0.0;
  for (Eigen::Index c = 0; c < q.size(); ++c)
    sum += w[static_cast<std::size_t>(c)] * std::pow(std::abs(q[c]), cfg.p);
  return cfg.a * std::pow(sum, 1.0 / cfg.p);
}

RVec penalty_gradient(const RVec& q, const ObjectiveConfig& cfg) {
  RVec g = RVec::Zero(q.size());
  if (cfg.a == 0.0 || box_mode(cfg)) return g;
  const auto& w = cfg.param.cell_areas();
  double sum = 0.0;
  for (Eigen::Index c = 0; c < q.size(); ++c)
    sum += w[static_cast<std::size_t>(c)] * std::pow(std::abs(q[c]), cfg.p);
  if (sum == 0.0) return g;  // non-differentiable at q = 0; subgradient 0
  double outer = cfg.a * std::pow(sum, 1.0 / cfg.p - 1.0);
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    double aq = std::abs(q[c]);
    if (aq > 0.0)
      g[c] = outer * w[static_cast<std::size_t>(c)] * std::pow(aq, cfg.p - 1.0) *
             (q[c] > 0.0 ? 1.0 : -1.0);
  }
  return g;
}

ObjectiveValue objective_parts(const RVec& q, const ObjectiveConfig& cfg) {
  ObjectiveValue v;
  v.misfit = cfg.kind == ObjectiveConfig::Kind::Rom ? rom_misfit(q, cfg) : fwi_misfit(q, cfg);
  v.penalty = penalty(q, cfg);
  return v;
}

double objective(const RVec& q, const ObjectiveConfig& cfg) { return objective_parts(q, cfg).total(); }

RVec gradient_fd(const std::function<double(const RVec&)>& phi, const RVec& q, double h) {
  if (!(h > 0.0)) throw InvalidArgumentError("gradient_fd: step must be positive");
  RVec g(q.size());
  RVec probe = q;
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    probe[c] = q[c] + h;
    double fp = phi(probe);
    probe[c] = q[c] - h;
    double fm = phi(probe);
    probe[c] = q[c];
    g[c] = (fp - fm) / (2.0 * h);
  }
  return g;
}

RVec fwi_adjoint_gradient(const RVec& q, const ObjectiveConfig& cfg) {
  check_objective_inputs(q, cfg);
  if (cfg.kind != ObjectiveConfig::Kind::Fwi)
    throw InvalidArgumentError("fwi_adjoint_gradient: config kind must be fwi");
  const std::size_t N = cfg.grid.size(), M = cfg.sources.size();
  if (cfg.observed_E.size() != N)
    throw InvalidArgumentError("fwi_adjoint_gradient: observed E count mismatch");

  const FunctionSpace& space = cfg.system->space();
  const Mesh& mesh = space.mesh();
  std::vector<CVec> u = forward_snapshots(q, cfg);
  RVec grad = RVec::Zero(q.size());

  // Reference mass matrices: int_T N_a N_b = area * R_ab on straight
  // triangles (barycentric shapes are affine-invariant).
  static const double R1[3][3] = {{2 / 12.0, 1 / 12.0, 1 / 12.0},
                                  {1 / 12.0, 2 / 12.0, 1 / 12.0},
                                  {1 / 12.0, 1 / 12.0, 2 / 12.0}};
  static const double R2[6][6] = {
      {6 / 180.0, -1 / 180.0, -1 / 180.0, 0.0, -4 / 180.0, 0.0},
      {-1 / 180.0, 6 / 180.0, -1 / 180.0, 0.0, 0.0, -4 / 180.0},
      {-1 / 180.0, -1 / 180.0, 6 / 180.0, -4 / 180.0, 0.0, 0.0},
      {0.0, 0.0, -4 / 180.0, 32 / 180.0, 16 / 180.0, 16 / 180.0},
      {-4 / 180.0, 0.0, 0.0, 16 / 180.0, 32 / 180.0, 16 / 180.0},
      {0.0, -4 / 180.0, 0.0, 16 / 180.0, 16 / 180.0, 32 / 180.0}};
  const int nd = space.dofs_per_cell();

  // d phi / d q_c = sum_{i,r,s} k_i^2 Re( g_i^{rs} (u_i^r)^T M^(c) u_i^s )
  // with residual g_i^{rs} = <f^r, u_i^s> - E_i^{rs}. Receiver collocation
  // and A^T = A make the adjoint states combinations w_i^s of the forward
  // snapshots; the cellwise mass pairing reduces to one element sweep.
  for (std::size_t i = 0; i < N; ++i) {
    double k2 = cfg.grid[i] * cfg.grid[i];
    CMat g_res(M, M);
    for (std::size_t r = 0; r < M; ++r)
      for (std::size_t s = 0; s < M; ++s)
        g_res(r, s) =
            cfg.sources.loads[r].dot(u[i * M + s].conjugate()) - cfg.observed_E[i](r, s);
    for (std::size_t s = 0; s < M; ++s) {
      CVec w = CVec::Zero(space.dof_count());
      for (std::size_t r = 0; r < M; ++r) w += g_res(r, s) * u[i * M + r];
      const CVec& us = u[i * M + s];
      for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        auto dofs = space.cell_dofs(t);
        double area = mesh.triangle_area(t);
        cplx acc = 0.0;
        for (int a = 0; a < nd; ++a) {
          cplx row = 0.0;
          for (int b = 0; b < nd; ++b)
            row += (nd == 3 ? R1[a][b] : R2[a][b]) * us[dofs[b]];
          acc += w[dofs[a]] * row;
        }
        grad[cfg.param.cell_of_tri[t]] += k2 * area * acc.real();
      }
    }
  }
  return grad + penalty_gradient(q, cfg);
}

RVec project_admissible(const RVec& q, const ObjectiveConfig& cfg) {
  RVec out(q.size());
  double floor = -1.0 + cfg.floor_delta;
  bool box = box_mode(cfg);
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    double v = std::max(q[c], floor);
    if (box) v = std::clamp(v, std::max(floor, -cfg.box_bound), cfg.box_bound);
    out[c] = v;
  }
  return out;
}

RVec project_admissible(const RVec& q, double floor_delta) {
  RVec out(q.size());
  for (Eigen::Index c = 0; c < q.size(); ++c) out[c] = std::max(q[c], -1.0 + floor_delta);
  return out;
}

InversionResult minimize(const ObjectiveConfig& cfg, const RVec& q0, const MinimizeOptions& opts) {
  if (opts.max_iter < 1) throw InvalidArgumentError("minimize: max_iter must be >= 1");
  RVec q = q0;
  if ((project_admissible(q, cfg) - q).norm() != 0.0)
    throw InvalidArgumentError("minimize: initial guess not admissible");

  auto phi = [&](const RVec& x) { return objective(x, cfg); };
  const bool use_adjoint = cfg.kind == ObjectiveConfig::Kind::Fwi;

  InversionResult res;
  ObjectiveValue val = objective_parts(q, cfg);
  res.objective_history.push_back(val.total());
  res.misfit_history.push_back(val.misfit);
  res.termination = "max_iterations";

  // The trial step starts at step_init and carries over between
  // iterations with doubling, so the line search adapts to the local
  // curvature scale instead of re-probing from 1 every time. Acceptance
  // is still gated by the Armijo test, which keeps the history monotone.
  double trial = opts.step_init;
  for (int it = 0; it < opts.max_iter; ++it) {
    RVec g = use_adjoint ? fwi_adjoint_gradient(q, cfg) : gradient_fd(phi, q, opts.fd_step);
    double pgnorm = (q - project_admissible(q - g, cfg)).norm();
    res.pgrad_norm_history.push_back(pgnorm);
    if (pgnorm <= opts.grad_tol) {
      res.termination = "gradient_tolerance";
      break;
    }

    double alpha = trial;
    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      RVec qn = project_admissible(q - alpha * g, cfg);
      ObjectiveValue vn = objective_parts(qn, cfg);
      double decrease = g.dot(qn - q);
      if (vn.total() <= val.total() + opts.armijo_c * decrease) {
        q = qn;
        val = vn;
        res.objective_history.push_back(val.total());
        res.misfit_history.push_back(val.misfit);
        res.step_history.push_back(alpha);
        res.iterations += 1;
        accepted = true;
        trial = std::min(alpha * 2.0, 1e8);
        break;
      }
      alpha *= opts.backtrack;
    }
    if (!accepted) {
      res.termination = "stalled";
      break;
    }
  }
  res.q_est = q;
  return res;
}

}  // namespace helmrom
