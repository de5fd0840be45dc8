#include <cmath>
#include <limits>
#include <memory>

#include "doctest.h"
#include "helmrom/errors.hpp"
#include "helmrom/inversion.hpp"
#include "oracles.hpp"

using namespace helmrom;

namespace {

/// Twin-experiment setup: reference data generated from a known contrast
/// on a coarse parameter grid, shared by ROM and FWI objectives.
struct TwinFixture {
  std::shared_ptr<const SparseComplexSystem> system;
  WavenumberGrid grid{{1.0, 2.0}};
  SourceSet sources;
  ParamGrid param;
  RVec q_true;

  explicit TwinFixture(int n = 12, int pnx = 3, int pny = 3) {
    auto mesh = std::make_shared<Mesh>(generate_rect_mesh(n, n));
    system = std::make_shared<SparseComplexSystem>(FunctionSpace::create(mesh, 1));
    sources = make_source_set(system->space(), {{0.3, 0.3}, {0.7, 0.65}}, 0.15);
    param = ParamGrid::create(*mesh, pnx, pny);
    q_true = RVec::Zero(param.cell_count());
    q_true[param.locate(0.5, 0.5)] = 0.25;
    q_true[param.locate(0.2, 0.8)] = -0.1;
  }

  SnapshotSet observe() const {
    return generate_snapshots(system, param.field(q_true), grid, sources);
  }

  ObjectiveConfig config(ObjectiveConfig::Kind kind) const {
    ObjectiveConfig cfg(kind, system, grid, sources, param);
    SnapshotSet snaps = observe();
    if (kind == ObjectiveConfig::Kind::Rom)
      cfg.observed_stiffness = assemble_rom_oracle(snaps, param.field(q_true), *system).stiffness_blocks;
    else
      cfg.observed_E = extract_data(snaps, sources).E;
    return cfg;
  }
};

}  // namespace

TEST_CASE("parameter grid maps triangles and areas consistently") {
  Mesh mesh = generate_rect_mesh(8, 8);
  ParamGrid grid = ParamGrid::create(mesh, 4, 2);
  CHECK(grid.cell_count() == 8);
  REQUIRE(grid.cell_of_tri.size() == mesh.triangle_count());
  double total = 0.0;
  for (double a : grid.cell_areas()) {
    CHECK(a > 0.0);
    total += a;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
  // locate is consistent with the cell layout
  CHECK(grid.locate(0.01, 0.01) == 0);
  CHECK(grid.locate(0.99, 0.99) == grid.cell_count() - 1);
  CHECK(grid.locate(-5.0, 0.2) == grid.locate(0.0, 0.2));  // clamped
  // expansion assigns each triangle its cell value
  RVec v = RVec::LinSpaced(8, 0.0, 7.0);
  CoefficientField f = grid.field(v);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    Vec2 c = mesh.centroid(t);
    CHECK(f(t, c.x, c.y) == doctest::Approx(v[grid.cell_of_tri[t]]));
  }
  CHECK_THROWS_AS(ParamGrid::create(mesh, 0, 3), InvalidArgumentError);
  CHECK(ParamGrid::create(mesh, 4, 2).fingerprint() == grid.fingerprint());
}

TEST_CASE("objectives vanish at the true contrast and not at zero") {
  TwinFixture fx;
  for (auto kind : {ObjectiveConfig::Kind::Rom, ObjectiveConfig::Kind::Fwi}) {
    ObjectiveConfig cfg = fx.config(kind);
    double at_truth = kind == ObjectiveConfig::Kind::Rom ? rom_misfit(fx.q_true, cfg)
                                                         : fwi_misfit(fx.q_true, cfg);
    double at_zero = kind == ObjectiveConfig::Kind::Rom
                         ? rom_misfit(RVec::Zero(cfg.param.cell_count()), cfg)
                         : fwi_misfit(RVec::Zero(cfg.param.cell_count()), cfg);
    CHECK(at_truth >= 0.0);
    CHECK(at_truth < 1e-18);
    CHECK(at_zero > 1e3 * std::max(at_truth, 1e-300));
  }
}

TEST_CASE("misfit evaluation is deterministic") {
  TwinFixture fx(8);
  ObjectiveConfig cfg = fx.config(ObjectiveConfig::Kind::Fwi);
  RVec q = 0.1 * RVec::Ones(cfg.param.cell_count());
  CHECK(fwi_misfit(q, cfg) == fwi_misfit(q, cfg));
}

TEST_CASE("penalty follows the area-weighted power law") {
  TwinFixture fx(8);
  ObjectiveConfig cfg = fx.config(ObjectiveConfig::Kind::Fwi);
  cfg.a = 0.5;
  cfg.p = 4.0;
  RVec q = RVec::Zero(cfg.param.cell_count());
  CHECK(penalty(q, cfg) == 0.0);
  CHECK(penalty_gradient(q, cfg).norm() == 0.0);

  q[0] = 0.3;
  q[4] = -0.2;
  double expected = 0.0;
  for (Eigen::Index c = 0; c < q.size(); ++c)
    expected += cfg.param.cell_areas()[c] * std::pow(std::abs(q[c]), 4.0);
  expected = cfg.a * std::pow(expected, 0.25);
  CHECK(penalty(q, cfg) == doctest::Approx(expected).epsilon(1e-13));

  // monotone in the weight
  ObjectiveConfig heavier = cfg;
  heavier.a = 1.0;
  CHECK(penalty(q, heavier) == doctest::Approx(2.0 * penalty(q, cfg)).epsilon(1e-13));

  // box mode drops the term entirely
  ObjectiveConfig box = cfg;
  box.p = std::numeric_limits<double>::infinity();
  CHECK(penalty(q, box) == 0.0);
  CHECK(penalty_gradient(q, box).norm() == 0.0);
}

TEST_CASE("penalty gradient matches finite differences away from zero") {
  TwinFixture fx(8);
  ObjectiveConfig cfg = fx.config(ObjectiveConfig::Kind::Fwi);
  cfg.a = 0.3;
  cfg.p = 4.0;
  RVec q(cfg.param.cell_count());
  for (Eigen::Index c = 0; c < q.size(); ++c) q[c] = 0.1 + 0.02 * static_cast<double>(c % 5);
  RVec g = penalty_gradient(q, cfg);
  RVec fd = gradient_fd([&](const RVec& v) { return penalty(v, cfg); }, q, 1e-6);
  CHECK((g - fd).norm() / fd.norm() < 1e-7);
}

TEST_CASE("finite-difference gradient is exact on quadratics") {
  Eigen::MatrixXd h(3, 3);
  h << 4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0;
  RVec b(3);
  b << 1.0, -2.0, 0.5;
  auto phi = [&](const RVec& x) { return 0.5 * x.dot(h * x) + b.dot(x); };
  RVec x(3);
  x << 0.2, -0.4, 0.7;
  RVec g = gradient_fd(phi, x, 1e-5);
  RVec exact = h * x + b;
  CHECK((g - exact).norm() < 1e-9 * exact.norm());
}

TEST_CASE("adjoint gradient matches finite differences of the objective") {
  TwinFixture fx(10);
  ObjectiveConfig cfg = fx.config(ObjectiveConfig::Kind::Fwi);
  cfg.a = 1e-4;
  cfg.p = 4.0;
  RVec q0 = RVec::Zero(cfg.param.cell_count());
  q0[4] = 0.1;  // keep the penalty smooth at the probe point? cells at zero stay zero
  RVec g = fwi_adjoint_gradient(q0, cfg);
  RVec fd = gradient_fd([&](const RVec& v) { return objective(v, cfg); }, q0, 1e-5);
  CHECK((g - fd).norm() / std::max(fd.norm(), 1e-300) < 1e-4);

  // five deterministic single-cell directions
  for (std::size_t c : {std::size_t(0), std::size_t(2), std::size_t(4), std::size_t(6),
                        std::size_t(8)}) {
    double h = 1e-5;
    RVec qp = q0, qm = q0;
    qp[c] += h;
    qm[c] -= h;
    double dd = (objective(qp, cfg) - objective(qm, cfg)) / (2.0 * h);
    CHECK(std::abs(g[c] - dd) / std::max(std::abs(dd), 1e-12) < 1e-4);
  }
}

TEST_CASE("adjoint gradient vanishes at zero residual") {
  TwinFixture fx(8);
  ObjectiveConfig cfg = fx.config(ObjectiveConfig::Kind::Fwi);
  cfg.a = 0.0;
  RVec g = fwi_adjoint_gradient(fx.q_true, cfg);
  // residual is zero by construction, so the misfit gradient collapses
  CHECK(g.norm() < 1e-10);
}

TEST_CASE("projection clamps to the admissible set and is idempotent") {
  RVec q(4);
  q << -2.0, -0.5, 0.2, 3.0;
  RVec p = project_admissible(q);
  CHECK(p[0] == -1.0);
  CHECK(p[1] == -0.5);
  CHECK(p[2] == 0.2);
  CHECK(p[3] == 3.0);
  RVec pf = project_admissible(q, 0.1);
  CHECK(pf[0] == doctest::Approx(-0.9));
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    RVec pp = project_admissible(p);
    CHECK(pp[i] == p[i]);
  }

  TwinFixture fx(8);
  ObjectiveConfig box = fx.config(ObjectiveConfig::Kind::Fwi);
  box.p = std::numeric_limits<double>::infinity();
  box.box_bound = 0.5;
  RVec pb = project_admissible(q, box);
  CHECK(pb[0] == -0.5);  // box bound tighter than the floor
  CHECK(pb[3] == 0.5);
  CHECK(pb[2] == 0.2);
}

TEST_CASE("minimizer accepts the truth immediately") {
  TwinFixture fx(10);
  for (auto kind : {ObjectiveConfig::Kind::Rom, ObjectiveConfig::Kind::Fwi}) {
    ObjectiveConfig cfg = fx.config(kind);
    cfg.a = 0.0;
    MinimizeOptions opts;
    opts.grad_tol = 1e-7;
    opts.max_iter = 5;
    InversionResult res = minimize(cfg, fx.q_true, opts);
    CHECK(res.termination == "gradient_tolerance");
    CHECK(res.iterations <= 1);
    CHECK((res.q_est - fx.q_true).norm() < 1e-6);
  }
}

TEST_CASE("minimizer drives a twin experiment toward the truth") {
  TwinFixture fx(12);
  for (auto kind : {ObjectiveConfig::Kind::Rom, ObjectiveConfig::Kind::Fwi}) {
    ObjectiveConfig cfg = fx.config(kind);
    cfg.a = 1e-6;
    MinimizeOptions opts;
    opts.max_iter = 30;
    opts.grad_tol = 1e-12;
    RVec q0 = RVec::Zero(cfg.param.cell_count());
    InversionResult res = minimize(cfg, q0, opts);
    REQUIRE(!res.misfit_history.empty());
    double initial = res.misfit_history.front();
    double last = res.misfit_history.back();
    CHECK(last < 0.1 * initial);
    // objective history is non-increasing and iterates stay admissible
    for (std::size_t i = 1; i < res.objective_history.size(); ++i)
      CHECK(res.objective_history[i] <= res.objective_history[i - 1] + 1e-15);
    for (Eigen::Index c = 0; c < res.q_est.size(); ++c) CHECK(res.q_est[c] >= -1.0);
    CHECK(res.step_history.size() == static_cast<std::size_t>(res.iterations));
  }
}

TEST_CASE("strong penalty pulls the estimate toward zero") {
  TwinFixture fx(10);
  ObjectiveConfig weak = fx.config(ObjectiveConfig::Kind::Fwi);
  weak.a = 1e-8;
  ObjectiveConfig strong = weak;
  strong.a = 1e3;
  MinimizeOptions opts;
  opts.max_iter = 20;
  RVec q0 = 0.05 * RVec::Ones(weak.param.cell_count());
  RVec q_weak = minimize(weak, q0, opts).q_est;
  RVec q_strong = minimize(strong, q0, opts).q_est;
  CHECK(q_strong.norm() < 0.5 * q_weak.norm());
  CHECK(q_strong.norm() < q0.norm());
}

TEST_CASE("box mode keeps iterates inside the bound") {
  TwinFixture fx(10);
  ObjectiveConfig cfg = fx.config(ObjectiveConfig::Kind::Fwi);
  cfg.p = std::numeric_limits<double>::infinity();
  cfg.box_bound = 0.15;
  MinimizeOptions opts;
  opts.max_iter = 15;
  InversionResult res = minimize(cfg, RVec::Zero(cfg.param.cell_count()), opts);
  for (Eigen::Index c = 0; c < res.q_est.size(); ++c)
    CHECK(std::abs(res.q_est[c]) <= 0.15 + 1e-15);
}

TEST_CASE("iteration cap is reported when progress continues") {
  TwinFixture fx(8);
  ObjectiveConfig cfg = fx.config(ObjectiveConfig::Kind::Fwi);
  cfg.a = 0.0;
  MinimizeOptions opts;
  opts.max_iter = 3;
  opts.grad_tol = 0.0;  // unreachable away from the exact minimum
  InversionResult res = minimize(cfg, RVec::Zero(cfg.param.cell_count()), opts);
  CHECK(res.termination == "max_iterations");
  CHECK(res.iterations == 3);
  CHECK(res.objective_history.size() == 4);  // q0 plus three accepted iterates
}

TEST_CASE("config validation rejects mismatched reference data") {
  TwinFixture fx(8);
  ObjectiveConfig cfg(ObjectiveConfig::Kind::Rom, fx.system, fx.grid, fx.sources, fx.param);
  RVec q = RVec::Zero(fx.param.cell_count());
  CHECK_THROWS_AS(rom_misfit(q, cfg), InvalidArgumentError);  // no observed blocks
  ObjectiveConfig cfg2(ObjectiveConfig::Kind::Fwi, fx.system, fx.grid, fx.sources, fx.param);
  CHECK_THROWS_AS(fwi_misfit(q, cfg2), InvalidArgumentError);  // no observed responses

  ObjectiveConfig good = fx.config(ObjectiveConfig::Kind::Fwi);
  CHECK_THROWS_AS(minimize(good, RVec::Constant(fx.param.cell_count(), -2.0)),
                  InvalidArgumentError);  // inadmissible start
}
