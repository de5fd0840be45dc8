#include "helmrom/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "helmrom/errors.hpp"

namespace helmrom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) { return format_g17(v); }

std::string join_ints(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ";";
    s += std::to_string(xs[i]);
  }
  return s;
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ";";
    s += fmt(xs[i]);
  }
  return s;
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based ranks
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

void ExperimentReport::check(bool ok, const std::string& what) {
  if (!ok) {
    passed = false;
    failures.push_back(what);
  }
}

std::string csv_escape(const std::string& field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::string ExperimentReport::to_csv() const {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out += ",";
    out += csv_escape(columns[c]);
  }
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ",";
      out += csv_escape(row[c]);
    }
    out += "\n";
  }
  return out;
}

std::string ExperimentReport::params_csv() const {
  std::string out = "key,value\n";
  for (const auto& kv : params)
    out += csv_escape(kv.first) + "," + csv_escape(kv.second) + "\n";
  out += "passed," + std::string(passed ? "true" : "false") + "\n";
  for (const auto& f : failures) out += "failure," + csv_escape(f) + "\n";
  return out;
}

double spearman_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw InvalidArgumentError("spearman_rank: need two equal-length series of size >= 2");
  std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0.0 || db == 0.0)
    throw InvalidArgumentError("spearman_rank: a series is constant");
  return num / std::sqrt(da * db);
}

WeakConvergenceRun run_weak_convergence(std::shared_ptr<const SparseComplexSystem> system,
                                        const ParamGrid& grid, const RVec& q0, double amplitude,
                                        const std::vector<int>& n_list, double k,
                                        const CVec& load) {
  if (!system) throw InvalidArgumentError("run_weak_convergence: null system");
  if (n_list.empty()) throw InvalidArgumentError("run_weak_convergence: empty n list");
  if (static_cast<std::size_t>(q0.size()) != grid.cell_count())
    throw InvalidArgumentError("run_weak_convergence: q0 size does not match the parameter grid");
  if (!(amplitude >= 0.0))
    throw InvalidArgumentError("run_weak_convergence: amplitude must be nonnegative");
  int n_max = 0;
  for (int n : n_list) {
    if (n < 1) throw InvalidArgumentError("run_weak_convergence: oscillation indices must be >= 1");
    n_max = std::max(n_max, n);
  }

  const Mesh& mesh = system->space().mesh();
  // Resolution guard: at least 10 elements per wavelength 2/n of the
  // finest oscillation sin(n_max pi x).
  double h = mesh.max_edge_length();
  double h_required = 2.0 / (10.0 * static_cast<double>(n_max));
  if (h > h_required) {
    std::ostringstream msg;
    msg << "run_weak_convergence: mesh does not resolve the finest oscillation (n=" << n_max
        << "): max edge length " << fmt(h) << " exceeds the required " << fmt(h_required)
        << " (10 elements per wavelength 2/n)";
    throw InvalidArgumentError(msg.str());
  }
  // Amplitude guard: q_n >= min_cell(q0) - A must stay admissible.
  double q0_min = q0.size() ? q0.minCoeff() : 0.0;
  if (q0_min - amplitude < -1.0)
    throw InvalidArgumentError(
        "run_weak_convergence: amplitude drives the contrast below the admissible floor");

  WeakConvergenceRun run;
  run.n_values = n_list;
  run.k = k;
  run.amplitude = amplitude;
  run.mesh_fingerprint = mesh.fingerprint();
  run.solver = "direct";

  CoefficientField q0_field = grid.field(q0);
  AssembledOperator op0(system, k, q0_field);
  Wavefield u0 = solve_direct(op0, load);
  double denom = system->h1_norm(u0.dofs);
  if (!(denom > 0.0))
    throw InvalidArgumentError("run_weak_convergence: baseline field is zero");

  if (amplitude == 0.0) {
    // q_n = q0 for every n: errors vanish identically and the ratio rows
    // are reported as skipped.
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      run.e.push_back(0.0);
      run.v.push_back(0.0);
      run.rho.push_back(kNaN);
    }
    return run;
  }

  AssembledOperator bg = make_background(system, k);
  // The oscillation is evaluated pointwise at quadrature nodes, with the
  // gridded baseline looked up by position so q_n and q0 agree cellwise.
  RVec q0_copy = q0;
  for (int n : n_list) {
    double A = amplitude;
    double w = static_cast<double>(n) * M_PI;
    auto qn_fn = [&grid, q0_copy, A, w](double x, double y) {
      return q0_copy[grid.locate(x, y)] + A * std::sin(w * x) * std::sin(w * y);
    };
    auto delta_fn = [A, w](double x, double y) { return A * std::sin(w * x) * std::sin(w * y); };
    AssembledOperator opn(system, k, CoefficientField::callback(qn_fn));
    Wavefield un = solve_direct(opn, load);
    double e = system->h1_norm(un.dofs - u0.dofs) / denom;
    CVec diff = apply_contrast_potential(bg, CoefficientField::callback(delta_fn), u0.dofs);
    double v = system->h1_norm(diff);
    run.e.push_back(e);
    run.v.push_back(v);
    run.rho.push_back(v > 0.0 ? e / (k * k * v) : kNaN);
  }
  return run;
}

namespace {

void weak_rows(const WeakConvergenceRun& run, ExperimentReport& rep) {
  rep.columns = {"n", "e_n", "v_n", "rho_n", "status", "mesh_fingerprint", "solver"};
  for (std::size_t i = 0; i < run.n_values.size(); ++i) {
    bool skipped = std::isnan(run.rho[i]);
    rep.rows.push_back({std::to_string(run.n_values[i]), fmt(run.e[i]), fmt(run.v[i]),
                        skipped ? std::string() : fmt(run.rho[i]),
                        skipped ? "skipped" : "ok", run.mesh_fingerprint, run.solver});
  }
}

void weak_params(const WeakConvergenceRun& run, ExperimentReport& rep) {
  rep.params.emplace_back("k", fmt(run.k));
  rep.params.emplace_back("amplitude", fmt(run.amplitude));
  rep.params.emplace_back("n_list", join_ints(run.n_values));
  rep.params.emplace_back("mesh_fingerprint", run.mesh_fingerprint);
  rep.params.emplace_back("solver", run.solver);
  rep.params.emplace_back(
      "note", "single fixed mesh for all n: e_n decay measures contrast-to-state continuity, "
              "not mesh refinement");
}

}  // namespace

ExperimentReport weak_report_from_run(const WeakConvergenceRun& run,
                                      const ExperimentThresholds& thr) {
  ExperimentReport rep;
  rep.id = "weak_convergence";
  weak_params(run, rep);
  rep.params.emplace_back("threshold_weak_ratio", fmt(thr.weak_ratio));
  weak_rows(run, rep);
  if (run.amplitude == 0.0) {
    for (double e : run.e) rep.check(e == 0.0, "zero perturbation must give zero error");
    return rep;
  }
  for (std::size_t i = 0; i < run.e.size(); ++i)
    rep.check(run.e[i] > 0.0, "e_n must be positive at n=" + std::to_string(run.n_values[i]));
  if (!run.e.empty()) {
    rep.check(run.e.back() <= thr.weak_ratio * run.e.front(),
              "state error must fall to <= " + fmt(thr.weak_ratio) +
                  " of its first value by the last n");
  }
  if (run.e.size() >= 2) {
    double sp = spearman_rank(run.e, run.v);
    rep.params.emplace_back("spearman_e_v", fmt(sp));
    rep.check(sp > 1.0 - 1e-12, "state and operator errors must decrease in the same order");
  }
  return rep;
}

ExperimentReport cc_report_from_run(const WeakConvergenceRun& run,
                                    const ExperimentThresholds& thr) {
  ExperimentReport rep;
  rep.id = "collectively_compact";
  weak_params(run, rep);
  rep.params.emplace_back("threshold_max_over_min", fmt(thr.cc_max_over_min));
  weak_rows(run, rep);
  if (run.amplitude == 0.0) return rep;  // all rows skipped; nothing to bound
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < run.rho.size(); ++i) {
    bool ok = std::isfinite(run.rho[i]) && run.rho[i] > 0.0;
    rep.check(ok, "rho_n must be finite and positive at n=" + std::to_string(run.n_values[i]));
    if (ok) {
      lo = std::min(lo, run.rho[i]);
      hi = std::max(hi, run.rho[i]);
    }
  }
  if (std::isfinite(lo) && lo > 0.0) {
    rep.params.emplace_back("max_over_min", fmt(hi / lo));
    rep.check(hi / lo <= thr.cc_max_over_min,
              "ratio spread max/min must stay within " + fmt(thr.cc_max_over_min));
  }
  return rep;
}

ExperimentReport weak_convergence_study(std::shared_ptr<const SparseComplexSystem> system,
                                        const ParamGrid& grid, const RVec& q0, double amplitude,
                                        const std::vector<int>& n_list, double k, const CVec& load,
                                        const ExperimentThresholds& thr) {
  return weak_report_from_run(
      run_weak_convergence(std::move(system), grid, q0, amplitude, n_list, k, load), thr);
}

ExperimentReport collectively_compact_check(std::shared_ptr<const SparseComplexSystem> system,
                                            const ParamGrid& grid, const RVec& q0,
                                            double amplitude, const std::vector<int>& n_list,
                                            double k, const CVec& load,
                                            const ExperimentThresholds& thr) {
  return cc_report_from_run(
      run_weak_convergence(std::move(system), grid, q0, amplitude, n_list, k, load), thr);
}

H2Run run_h2_sweep(std::shared_ptr<const FunctionSpace> space_p2,
                   const std::vector<double>& k_list,
                   const std::function<double(double, double)>& f) {
  if (!space_p2) throw InvalidArgumentError("run_h2_sweep: null space");
  if (space_p2->order() != 2)
    throw InvalidArgumentError("run_h2_sweep: requires an order-2 space");
  if (k_list.empty()) throw InvalidArgumentError("run_h2_sweep: empty wavenumber list");
  for (double k : k_list)
    if (!(k > 0.0)) throw InvalidArgumentError("run_h2_sweep: wavenumbers must be positive");

  H2Run run;
  run.k_values = k_list;
  run.mesh_fingerprint = space_p2->mesh().fingerprint();
  run.solver = "direct";
  double f_l2 = l2_norm_of(space_p2->mesh(), f);
  auto system = std::make_shared<SparseComplexSystem>(space_p2);
  CVec load = assemble_load(*space_p2, [&f](double x, double y) { return cplx(f(x, y), 0.0); });
  for (double k : k_list) {
    AssembledOperator op = make_background(system, k);
    Wavefield u = solve_direct(op, load);
    run.ratios.push_back(h2_bound_ratio(u, f_l2, k));
  }
  return run;
}

ExperimentReport h2_report_from_run(const H2Run& run, const ExperimentThresholds& thr) {
  ExperimentReport rep;
  rep.id = "h2_sweep";
  rep.params.emplace_back("k_list", join_doubles(run.k_values));
  rep.params.emplace_back("order", "2");
  rep.params.emplace_back("mesh_fingerprint", run.mesh_fingerprint);
  rep.params.emplace_back("solver", run.solver);
  rep.params.emplace_back("threshold_max_over_min", fmt(thr.h2_max_over_min));
  rep.columns = {"k", "ratio", "mesh_fingerprint", "solver"};
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < run.k_values.size(); ++i) {
    rep.rows.push_back({fmt(run.k_values[i]), fmt(run.ratios[i]), run.mesh_fingerprint,
                        run.solver});
    bool ok = std::isfinite(run.ratios[i]) && run.ratios[i] > 0.0;
    rep.check(ok, "ratio must be finite and positive at k=" + fmt(run.k_values[i]));
    if (ok) {
      lo = std::min(lo, run.ratios[i]);
      hi = std::max(hi, run.ratios[i]);
    }
  }
  if (std::isfinite(lo) && lo > 0.0) {
    rep.params.emplace_back("max_over_min", fmt(hi / lo));
    rep.check(hi / lo <= thr.h2_max_over_min,
              "ratio spread max/min must stay within " + fmt(thr.h2_max_over_min));
  }
  return rep;
}

ExperimentReport h2_stability_report(const H2Run& coarse, const H2Run& fine,
                                     const ExperimentThresholds& thr) {
  if (coarse.k_values != fine.k_values)
    throw InvalidArgumentError("h2_stability_report: wavenumber lists differ");
  ExperimentReport rep;
  rep.id = "h2_refinement";
  rep.params.emplace_back("k_list", join_doubles(coarse.k_values));
  rep.params.emplace_back("mesh_fingerprint_coarse", coarse.mesh_fingerprint);
  rep.params.emplace_back("mesh_fingerprint_fine", fine.mesh_fingerprint);
  rep.params.emplace_back("solver", coarse.solver);
  rep.params.emplace_back("threshold_max_over_min", fmt(thr.h2_max_over_min));
  rep.params.emplace_back("threshold_refine_change", fmt(thr.h2_refine_change));
  rep.columns = {"k",      "ratio_coarse",           "ratio_fine",
                 "rel_change", "mesh_fingerprint_coarse", "mesh_fingerprint_fine"};
  for (std::size_t i = 0; i < coarse.k_values.size(); ++i) {
    double rc = coarse.ratios[i], rf = fine.ratios[i];
    double change = rc > 0.0 ? std::abs(rf - rc) / rc : kNaN;
    rep.rows.push_back({fmt(coarse.k_values[i]), fmt(rc), fmt(rf), fmt(change),
                        coarse.mesh_fingerprint, fine.mesh_fingerprint});
    rep.check(std::isfinite(change) && change <= thr.h2_refine_change,
              "ratio must change by <= " + fmt(thr.h2_refine_change) +
                  " under refinement at k=" + fmt(coarse.k_values[i]));
  }
  auto spread = [](const H2Run& r) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double x : r.ratios) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    return hi / lo;
  };
  double sc = spread(coarse), sf = spread(fine);
  rep.params.emplace_back("max_over_min_coarse", fmt(sc));
  rep.params.emplace_back("max_over_min_fine", fmt(sf));
  rep.check(sc <= thr.h2_max_over_min, "coarse ratio spread must stay within threshold");
  rep.check(sf <= thr.h2_max_over_min, "fine ratio spread must stay within threshold");
  return rep;
}

ExperimentReport h2_sweep(std::shared_ptr<const FunctionSpace> space_p2,
                          const std::vector<double>& k_list,
                          const std::function<double(double, double)>& f,
                          const ExperimentThresholds& thr) {
  return h2_report_from_run(run_h2_sweep(std::move(space_p2), k_list, f), thr);
}

MmsRun run_mms(int base_n, int refinements, double k, double dir_x, double dir_y, QuadOrder quad,
               int order) {
  if (base_n < 1) throw InvalidArgumentError("run_mms: base resolution must be >= 1");
  if (refinements < 0) throw InvalidArgumentError("run_mms: refinements must be >= 0");
  if (!(k > 0.0)) throw InvalidArgumentError("run_mms: wavenumber must be positive");
  double dn = std::hypot(dir_x, dir_y);
  if (!(dn > 0.0)) throw InvalidArgumentError("run_mms: direction must be nonzero");
  double dx = dir_x / dn, dy = dir_y / dn;

  MmsRun run;
  run.k = k;
  run.dir_x = dx;
  run.dir_y = dy;
  run.order = order;
  run.quad = quad;
  run.solver = "direct";

  // Exact plane wave u*(x) = exp(i k d.x) with |d| = 1 solves the
  // homogeneous background problem; its impedance data drive the solve.
  auto exact = [k, dx, dy](double x, double y) {
    return std::exp(cplx(0.0, k * (dx * x + dy * y)));
  };
  auto exact_grad = [k, dx, dy, exact](double x, double y) -> std::array<cplx, 2> {
    cplx u = exact(x, y);
    return {cplx(0.0, k * dx) * u, cplx(0.0, k * dy) * u};
  };
  auto g = [k, dx, dy, exact](double x, double y, const Vec2& normal) {
    return cplx(0.0, k) * (dx * normal.x + dy * normal.y - 1.0) * exact(x, y);
  };

  auto mesh = std::make_shared<Mesh>(generate_rect_mesh(base_n, base_n));
  for (int level = 0; level <= refinements; ++level) {
    if (level > 0) mesh = std::make_shared<Mesh>(refine_uniform(*mesh));
    auto space = FunctionSpace::create(mesh, order);
    // The weighted mass honors the requested quadrature so the rule enters
    // the discrete operator, not just the error measurement.
    SpMat S = assemble_stiffness(*space);
    SpMat M = assemble_mass(*space, CoefficientField::constant(1.0), quad);
    SpMat B = assemble_boundary_mass(*space);
    SpMat A = S - cplx(k * k, 0.0) * M - cplx(0.0, k) * B;
    A.makeCompressed();
    auto fact = lu_factorize(A);
    CVec b = assemble_boundary_load(*space, g);
    Wavefield u{space, fact->solve(b)};
    ErrorNorms err = error_vs_exact(u, exact, exact_grad, quad);
    run.h.push_back(mesh->max_edge_length());
    run.l2_err.push_back(err.l2);
    run.h1_err.push_back(err.h1);
    run.fingerprints.push_back(mesh->fingerprint());
  }

  run.l2_rate.assign(run.h.size(), kNaN);
  run.h1_rate.assign(run.h.size(), kNaN);
  for (std::size_t j = 1; j < run.h.size(); ++j) {
    run.l2_rate[j] = std::log2(run.l2_err[j - 1] / run.l2_err[j]);
    run.h1_rate[j] = std::log2(run.h1_err[j - 1] / run.h1_err[j]);
  }
  std::size_t m = run.h.size();
  if (m >= 3) {
    run.fitted_l2 = 0.5 * (run.l2_rate[m - 1] + run.l2_rate[m - 2]);
    run.fitted_h1 = 0.5 * (run.h1_rate[m - 1] + run.h1_rate[m - 2]);
  } else if (m == 2) {
    run.fitted_l2 = run.l2_rate[1];
    run.fitted_h1 = run.h1_rate[1];
  } else {
    run.fitted_l2 = kNaN;
    run.fitted_h1 = kNaN;
  }
  return run;
}

ExperimentReport mms_report_from_run(const MmsRun& run, const ExperimentThresholds& thr) {
  ExperimentReport rep;
  rep.id = "mms_convergence";
  rep.params.emplace_back("k", fmt(run.k));
  rep.params.emplace_back("direction", fmt(run.dir_x) + ";" + fmt(run.dir_y));
  rep.params.emplace_back("order", std::to_string(run.order));
  rep.params.emplace_back("quadrature",
                          run.quad == QuadOrder::Degree2 ? "degree2" : "degree4");
  rep.params.emplace_back("solver", run.solver);
  rep.params.emplace_back("fitted_l2_rate", fmt(run.fitted_l2));
  rep.params.emplace_back("fitted_h1_rate", fmt(run.fitted_h1));
  rep.params.emplace_back("threshold_l2_rate", fmt(thr.mms_l2_rate));
  rep.params.emplace_back("threshold_h1_rate", fmt(thr.mms_h1_rate));
  rep.columns = {"h", "l2_err", "h1_err", "l2_rate", "h1_rate", "mesh_fingerprint", "solver"};
  for (std::size_t i = 0; i < run.h.size(); ++i) {
    rep.rows.push_back({fmt(run.h[i]), fmt(run.l2_err[i]), fmt(run.h1_err[i]),
                        std::isnan(run.l2_rate[i]) ? std::string() : fmt(run.l2_rate[i]),
                        std::isnan(run.h1_rate[i]) ? std::string() : fmt(run.h1_rate[i]),
                        run.fingerprints[i], run.solver});
  }
  for (std::size_t i = 1; i < run.h.size(); ++i) {
    rep.check(run.l2_err[i] < run.l2_err[i - 1], "L2 error must decrease under refinement");
    rep.check(run.h1_err[i] < run.h1_err[i - 1], "H1 error must decrease under refinement");
  }
  rep.check(std::isfinite(run.fitted_l2) && run.fitted_l2 >= thr.mms_l2_rate,
            "fitted L2 rate must reach " + fmt(thr.mms_l2_rate));
  rep.check(std::isfinite(run.fitted_h1) && run.fitted_h1 >= thr.mms_h1_rate,
            "fitted H1 rate must reach " + fmt(thr.mms_h1_rate));
  return rep;
}

ExperimentReport mms_convergence(int base_n, int refinements, double k, double dir_x,
                                 double dir_y, const ExperimentThresholds& thr) {
  return mms_report_from_run(run_mms(base_n, refinements, k, dir_x, dir_y), thr);
}

}  // namespace helmrom
