// Command-line front end: configuration parsing, command dispatch, and
// artifact emission for the scattering, reduced-order, and inversion
// pipelines. Exit codes: 0 success, 2 configuration error, 3 numerical
// failure, 4 threshold failure in verify/experiment commands.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "helmrom/errors.hpp"
#include "helmrom/experiments.hpp"
#include "helmrom/fem.hpp"
#include "helmrom/forward.hpp"
#include "helmrom/inversion.hpp"
#include "helmrom/io.hpp"
#include "helmrom/mesh.hpp"
#include "helmrom/rom.hpp"
#include "helmrom/solver.hpp"
#include "helmrom/util.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace helmrom;

// ---------------------------------------------------------------------------
// Strict configuration access with dotted-path diagnostics.

class ConfigView {
 public:
  ConfigView(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j_->is_object()) throw ConfigError("'" + path_ + "' must be an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_->contains(key); }
  bool is_number(const std::string& key) const {
    return has(key) && j_->at(key).is_number();
  }

  /// Rejects keys outside the allowed set, naming the offender.
  void allow_keys(std::initializer_list<const char*> allowed) const {
    for (const auto& kv : j_->items()) {
      bool known = false;
      for (const char* a : allowed)
        if (kv.key() == a) {
          known = true;
          break;
        }
      if (!known) throw ConfigError("unknown key '" + join(kv.key()) + "'");
    }
  }

  ConfigView section(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing section '" + join(key) + "'");
    return ConfigView(j_->at(key), join(key));
  }

  double number(const std::string& key) const {
    require(key);
    return to_number(j_->at(key), key);
  }
  double number_or(const std::string& key, double def) const {
    return has(key) ? number(key) : def;
  }

  int integer(const std::string& key) const {
    require(key);
    const json& v = j_->at(key);
    if (!v.is_number_integer())
      throw ConfigError("'" + join(key) + "' must be an integer");
    return v.get<int>();
  }
  int integer_or(const std::string& key, int def) const {
    return has(key) ? integer(key) : def;
  }

  std::string str(const std::string& key) const {
    require(key);
    const json& v = j_->at(key);
    if (!v.is_string()) throw ConfigError("'" + join(key) + "' must be a string");
    return v.get<std::string>();
  }
  std::string str_or(const std::string& key, const std::string& def) const {
    return has(key) ? str(key) : def;
  }

  bool bool_or(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const json& v = j_->at(key);
    if (!v.is_boolean()) throw ConfigError("'" + join(key) + "' must be a boolean");
    return v.get<bool>();
  }

  std::vector<double> number_list(const std::string& key) const {
    require(key);
    const json& v = j_->at(key);
    if (!v.is_array()) throw ConfigError("'" + join(key) + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(to_number(e, key));
    return out;
  }

  std::vector<int> int_list(const std::string& key) const {
    require(key);
    const json& v = j_->at(key);
    if (!v.is_array()) throw ConfigError("'" + join(key) + "' must be an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer())
        throw ConfigError("'" + join(key) + "' must contain only integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  std::vector<Vec2> point_list(const std::string& key) const {
    require(key);
    const json& v = j_->at(key);
    if (!v.is_array()) throw ConfigError("'" + join(key) + "' must be an array of [x, y] pairs");
    std::vector<Vec2> out;
    for (const auto& e : v) {
      if (!e.is_array() || e.size() != 2)
        throw ConfigError("'" + join(key) + "' must contain [x, y] pairs");
      out.push_back({to_number(e[0], key), to_number(e[1], key)});
    }
    return out;
  }

 private:
  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  void require(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing key '" + join(key) + "'");
  }
  double to_number(const json& v, const std::string& key) const {
    if (!v.is_number()) throw ConfigError("'" + join(key) + "' must be a number");
    return v.get<double>();
  }

  const json* j_;
  std::string path_;
};

// ---------------------------------------------------------------------------
// Config sections -> domain objects, mirrored into the resolved config.

struct CliOptions {
  std::string config_path;
  std::string output_override;
  int threads = 1;
  std::string mode = "direct";
  bool verbose = false;
};

void info(const CliOptions& cli, const std::string& msg) {
  if (cli.verbose) std::fprintf(stderr, "[helmrom] %s\n", msg.c_str());
}

json load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

std::shared_ptr<const Mesh> parse_domain(const ConfigView& root, json& resolved) {
  ConfigView dom = root.section("domain");
  std::string shape = dom.str_or("shape", "rect");
  int refine = dom.integer_or("refine", 0);
  if (refine < 0) throw ConfigError("'domain.refine' must be >= 0");
  Mesh mesh;
  if (shape == "rect") {
    dom.allow_keys({"shape", "nx", "ny", "width", "height", "refine"});
    int nx = dom.integer("nx");
    int ny = dom.integer_or("ny", nx);
    double width = dom.number_or("width", 1.0);
    double height = dom.number_or("height", 1.0);
    if (nx < 1 || ny < 1) throw ConfigError("'domain.nx'/'domain.ny' must be >= 1");
    if (!(width > 0.0) || !(height > 0.0))
      throw ConfigError("'domain.width'/'domain.height' must be positive");
    mesh = generate_rect_mesh(nx, ny, width, height);
    resolved["domain"] = {{"shape", "rect"}, {"nx", nx},         {"ny", ny},
                          {"width", width},  {"height", height}, {"refine", refine}};
  } else if (shape == "disk") {
    dom.allow_keys({"shape", "n_boundary", "radius", "refine"});
    int nb = dom.integer("n_boundary");
    double radius = dom.number_or("radius", 1.0);
    if (!(radius > 0.0)) throw ConfigError("'domain.radius' must be positive");
    if (nb < 8) throw ConfigError("'domain.n_boundary' must be >= 8");
    mesh = generate_polygon_disk_mesh(nb, radius);
    resolved["domain"] = {
        {"shape", "disk"}, {"n_boundary", nb}, {"radius", radius}, {"refine", refine}};
  } else {
    throw ConfigError("'domain.shape' must be \"rect\" or \"disk\"");
  }
  for (int i = 0; i < refine; ++i) mesh = refine_uniform(mesh);
  return std::make_shared<Mesh>(std::move(mesh));
}

int parse_order(const ConfigView& root, json& resolved) {
  int order = root.integer_or("element_order", 1);
  if (order != 1 && order != 2) throw ConfigError("'element_order' must be 1 or 2");
  resolved["element_order"] = order;
  return order;
}

std::vector<double> parse_wavenumbers(const ConfigView& root, json& resolved) {
  std::vector<double> ks = root.number_list("wavenumbers");
  if (ks.empty()) throw ConfigError("'wavenumbers' must be nonempty");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(ks[i] > 0.0)) throw ConfigError("'wavenumbers' must be positive");
    if (i > 0 && !(ks[i] > ks[i - 1]))
      throw ConfigError("'wavenumbers' must be strictly increasing");
  }
  resolved["wavenumbers"] = ks;
  return ks;
}

KrylovConfig parse_solver(const ConfigView& root, json& resolved) {
  KrylovConfig cfg;
  if (root.has("solver")) {
    ConfigView s = root.section("solver");
    s.allow_keys({"tolerance", "max_iterations", "restart"});
    cfg.tol = s.number_or("tolerance", cfg.tol);
    cfg.max_iter = s.integer_or("max_iterations", cfg.max_iter);
    cfg.restart = s.integer_or("restart", cfg.restart);
    if (!(cfg.tol > 0.0)) throw ConfigError("'solver.tolerance' must be positive");
    if (cfg.max_iter < 1) throw ConfigError("'solver.max_iterations' must be >= 1");
    if (cfg.restart < 1) throw ConfigError("'solver.restart' must be >= 1");
  }
  resolved["solver"] = {{"tolerance", cfg.tol},
                        {"max_iterations", cfg.max_iter},
                        {"restart", cfg.restart}};
  return cfg;
}

struct SourceSpec {
  std::vector<Vec2> positions;
  double radius = 0.0;
};

SourceSpec parse_sources(const ConfigView& root, json& resolved, bool required) {
  SourceSpec spec;
  if (root.has("sources")) {
    ConfigView s = root.section("sources");
    s.allow_keys({"positions", "radius"});
    spec.positions = s.point_list("positions");
    spec.radius = s.number_or("radius", 0.0);
    if (spec.radius < 0.0) throw ConfigError("'sources.radius' must be >= 0");
  } else if (required) {
    throw ConfigError("missing section 'sources'");
  }
  json pos = json::array();
  for (const auto& p : spec.positions) pos.push_back({p.x, p.y});
  resolved["sources"] = {{"positions", pos}, {"radius", spec.radius}};
  return spec;
}

struct QTrueSpec {
  enum class Kind { Zero, Constant, BoxIndicator, File };
  Kind kind = Kind::Zero;
  double value = 0.0;
  std::array<double, 4> box{0.0, 0.0, 0.0, 0.0};  // x0, y0, x1, y1
  std::string file;
};

QTrueSpec parse_q_true(const ConfigView& root, json& resolved) {
  QTrueSpec spec;
  if (!root.has("q_true")) {
    resolved["q_true"] = {{"phantom", "zero"}};
    return spec;
  }
  ConfigView q = root.section("q_true");
  if (q.has("file")) {
    q.allow_keys({"file"});
    spec.kind = QTrueSpec::Kind::File;
    spec.file = q.str("file");
    resolved["q_true"] = {{"file", spec.file}};
    return spec;
  }
  std::string phantom = q.str("phantom");
  if (phantom == "zero") {
    q.allow_keys({"phantom"});
    spec.kind = QTrueSpec::Kind::Zero;
    resolved["q_true"] = {{"phantom", "zero"}};
  } else if (phantom == "constant") {
    q.allow_keys({"phantom", "value"});
    spec.kind = QTrueSpec::Kind::Constant;
    spec.value = q.number("value");
    resolved["q_true"] = {{"phantom", "constant"}, {"value", spec.value}};
  } else if (phantom == "box_indicator") {
    q.allow_keys({"phantom", "value", "box"});
    spec.kind = QTrueSpec::Kind::BoxIndicator;
    spec.value = q.number("value");
    std::vector<double> b = q.number_list("box");
    if (b.size() != 4) throw ConfigError("'q_true.box' must be [x0, y0, x1, y1]");
    if (!(b[0] < b[2]) || !(b[1] < b[3]))
      throw ConfigError("'q_true.box' must satisfy x0 < x1 and y0 < y1");
    spec.box = {b[0], b[1], b[2], b[3]};
    resolved["q_true"] = {{"phantom", "box_indicator"}, {"value", spec.value}, {"box", b}};
  } else {
    throw ConfigError("'q_true.phantom' must be \"zero\", \"constant\", or \"box_indicator\"");
  }
  if (spec.value < -1.0) throw ConfigError("'q_true.value' must be >= -1");
  return spec;
}

CoefficientField q_true_field(const QTrueSpec& spec, const Mesh& mesh) {
  switch (spec.kind) {
    case QTrueSpec::Kind::Zero:
      return CoefficientField::constant(0.0);
    case QTrueSpec::Kind::Constant:
      return CoefficientField::constant(spec.value);
    case QTrueSpec::Kind::BoxIndicator: {
      std::vector<double> cells(mesh.triangle_count(), 0.0);
      for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        Vec2 c = mesh.centroid(t);
        if (c.x >= spec.box[0] && c.x <= spec.box[2] && c.y >= spec.box[1] &&
            c.y <= spec.box[3])
          cells[t] = spec.value;
      }
      return CoefficientField::piecewise(std::move(cells));
    }
    case QTrueSpec::Kind::File: {
      RVec v = load_param_values(spec.file);
      if (static_cast<std::size_t>(v.size()) != mesh.triangle_count())
        throw ConfigError("'q_true.file' holds " + std::to_string(v.size()) +
                          " values; the mesh has " + std::to_string(mesh.triangle_count()) +
                          " triangles");
      std::vector<double> cells(v.data(), v.data() + v.size());
      return CoefficientField::piecewise(std::move(cells));
    }
  }
  throw ConfigError("unreachable q_true kind");
}

RVec q_true_grid_values(const QTrueSpec& spec, const ParamGrid& grid) {
  RVec v = RVec::Zero(static_cast<Eigen::Index>(grid.cell_count()));
  switch (spec.kind) {
    case QTrueSpec::Kind::Zero:
      break;
    case QTrueSpec::Kind::Constant:
      v.setConstant(spec.value);
      break;
    case QTrueSpec::Kind::BoxIndicator:
      for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix) {
          double cx = grid.x0 + (ix + 0.5) * grid.width / grid.nx;
          double cy = grid.y0 + (iy + 0.5) * grid.height / grid.ny;
          if (cx >= spec.box[0] && cx <= spec.box[2] && cy >= spec.box[1] &&
              cy <= spec.box[3])
            v[static_cast<Eigen::Index>(iy) * grid.nx + ix] = spec.value;
        }
      break;
    case QTrueSpec::Kind::File: {
      RVec f = load_param_values(spec.file);
      if (f.size() != v.size())
        throw ConfigError("'q_true.file' holds " + std::to_string(f.size()) +
                          " values; the parameter grid has " +
                          std::to_string(grid.cell_count()) + " cells");
      v = f;
      break;
    }
  }
  return v;
}

ExperimentThresholds parse_thresholds(const ConfigView& root, json& resolved) {
  ExperimentThresholds thr;
  if (root.has("thresholds")) {
    ConfigView t = root.section("thresholds");
    t.allow_keys({"weak_ratio", "cc_max_over_min", "h2_max_over_min", "h2_refine_change",
                  "mms_l2_rate", "mms_h1_rate"});
    thr.weak_ratio = t.number_or("weak_ratio", thr.weak_ratio);
    thr.cc_max_over_min = t.number_or("cc_max_over_min", thr.cc_max_over_min);
    thr.h2_max_over_min = t.number_or("h2_max_over_min", thr.h2_max_over_min);
    thr.h2_refine_change = t.number_or("h2_refine_change", thr.h2_refine_change);
    thr.mms_l2_rate = t.number_or("mms_l2_rate", thr.mms_l2_rate);
    thr.mms_h1_rate = t.number_or("mms_h1_rate", thr.mms_h1_rate);
  }
  resolved["thresholds"] = {{"weak_ratio", thr.weak_ratio},
                            {"cc_max_over_min", thr.cc_max_over_min},
                            {"h2_max_over_min", thr.h2_max_over_min},
                            {"h2_refine_change", thr.h2_refine_change},
                            {"mms_l2_rate", thr.mms_l2_rate},
                            {"mms_h1_rate", thr.mms_h1_rate}};
  return thr;
}

std::string resolve_output(const ConfigView& root, const CliOptions& cli, json& resolved) {
  std::string out = cli.output_override;
  if (out.empty()) out = root.str_or("output", "");
  if (out.empty())
    throw ConfigError("no output directory: set 'output' in the config or pass --output");
  fs::create_directories(out);
  resolved["output"] = out;
  return out;
}

void check_top_level(const ConfigView& root) {
  root.allow_keys({"domain", "element_order", "wavenumbers", "sources", "q_true", "solver",
                   "inversion", "verify", "experiment", "thresholds", "output"});
}

void write_resolved(const std::string& out_dir, const json& resolved) {
  write_text_atomic(out_dir + "/resolved_config.json", resolved.dump(2) + "\n");
}

void write_report(const std::string& out_dir, const std::string& stem,
                  const ExperimentReport& rep) {
  write_text_atomic(out_dir + "/" + stem + ".csv", rep.to_csv());
  write_text_atomic(out_dir + "/" + stem + "_params.csv", rep.params_csv());
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_mesh(const ConfigView& root, const CliOptions& cli) {
  json resolved;
  resolved["command"] = "mesh";
  auto mesh = parse_domain(root, resolved);
  std::string out = resolve_output(root, cli, resolved);
  save_mesh(out + "/mesh", *mesh);
  ExperimentReport rep;
  rep.id = "mesh_stats";
  rep.columns = {"vertices",  "triangles",       "boundary_edges", "area",
                 "max_edge",  "min_edge",        "boundary_length", "mesh_fingerprint"};
  rep.rows.push_back({std::to_string(mesh->vertices.size()),
                      std::to_string(mesh->triangle_count()),
                      std::to_string(mesh->boundary_edges.size()), format_g17(mesh->area()),
                      format_g17(mesh->max_edge_length()), format_g17(mesh->min_edge_length()),
                      format_g17(mesh->boundary_length()), mesh->fingerprint()});
  write_report(out, "mesh_stats", rep);
  write_resolved(out, resolved);
  info(cli, "mesh written to " + out);
  return 0;
}

int cmd_solve(const ConfigView& root, const CliOptions& cli) {
  json resolved;
  resolved["command"] = "solve";
  resolved["mode"] = cli.mode;
  auto mesh = parse_domain(root, resolved);
  int order = parse_order(root, resolved);
  std::vector<double> ks = parse_wavenumbers(root, resolved);
  SourceSpec src = parse_sources(root, resolved, /*required=*/false);
  QTrueSpec qspec = parse_q_true(root, resolved);
  KrylovConfig krylov = parse_solver(root, resolved);
  std::string out = resolve_output(root, cli, resolved);

  auto space = FunctionSpace::create(mesh, order);
  auto system = std::make_shared<SparseComplexSystem>(space);
  CoefficientField q = q_true_field(qspec, *mesh);

  std::vector<CVec> loads;
  if (src.positions.empty()) {
    loads.push_back(CVec::Zero(space->dof_count()));
  } else {
    SourceSet set = make_source_set(*space, src.positions, src.radius);
    loads = set.loads;
  }

  ExperimentReport rep;
  rep.id = "solve_report";
  rep.columns = {"k",          "source", "mode",   "iterations",
                 "residual",   "h1_norm", "mesh_fingerprint", "solver_tolerance"};
  for (std::size_t i = 0; i < ks.size(); ++i) {
    for (std::size_t s = 0; s < loads.size(); ++s) {
      Wavefield u;
      int iters = 0;
      std::string residual;
      if (cli.mode == "vls") {
        AssembledOperator bg = make_background(system, ks[i]);
        LsSolution sol = solve_ls(bg, q, loads[s], krylov);
        u = std::move(sol.field);
        iters = sol.iterations;
        residual = sol.residual_history.empty()
                       ? std::string()
                       : format_g17(sol.residual_history.back());
      } else {
        AssembledOperator op(system, ks[i], q);
        u = solve_direct(op, loads[s]);
      }
      std::string stem = "field_k" + std::to_string(i) + "_s" + std::to_string(s);
      save_wavefield(out + "/" + stem, u);
      rep.rows.push_back({format_g17(ks[i]), std::to_string(s), cli.mode,
                          std::to_string(iters), residual, format_g17(system->h1_norm(u.dofs)),
                          mesh->fingerprint(), format_g17(krylov.tol)});
      info(cli, "solved " + stem);
    }
  }
  write_report(out, "solve_report", rep);
  write_resolved(out, resolved);
  return 0;
}

struct RomBuildResult {
  std::shared_ptr<const FunctionSpace> space;
  RomDataset data;
  RomMatrices oracle;
  RomMatrices recovered;
};

RomBuildResult build_rom(const ConfigView& root, const CliOptions& cli, json& resolved) {
  auto mesh = parse_domain(root, resolved);
  int order = parse_order(root, resolved);
  std::vector<double> ks = parse_wavenumbers(root, resolved);
  SourceSpec src = parse_sources(root, resolved, /*required=*/true);
  if (src.positions.empty()) throw ConfigError("'sources.positions' must be nonempty");
  QTrueSpec qspec = parse_q_true(root, resolved);
  KrylovConfig krylov = parse_solver(root, resolved);

  auto space = FunctionSpace::create(mesh, order);
  auto system = std::make_shared<SparseComplexSystem>(space);
  CoefficientField q = q_true_field(qspec, *mesh);
  SourceSet sources = make_source_set(*space, src.positions, src.radius);
  WavenumberGrid grid(ks);

  SnapshotOptions opts;
  opts.method = cli.mode == "vls" ? SnapshotOptions::Method::Ls : SnapshotOptions::Method::Direct;
  opts.krylov = krylov;
  opts.threads = cli.threads;
  info(cli, "generating snapshots (" + cli.mode + ")");
  SnapshotSet snapshots = generate_snapshots(system, q, grid, sources, opts);

  RomBuildResult r;
  r.space = space;
  r.data = extract_data(snapshots, sources);
  r.oracle = assemble_rom_oracle(snapshots, q, *system);
  std::vector<CMat> bblocks = boundary_blocks_from_traces(r.data, *space);
  r.recovered = recover_rom_from_data(r.data, bblocks, *space);
  return r;
}

int cmd_rom_build(const ConfigView& root, const CliOptions& cli) {
  json resolved;
  resolved["command"] = "rom-build";
  resolved["mode"] = cli.mode;
  RomBuildResult r = build_rom(root, cli, resolved);
  std::string out = resolve_output(root, cli, resolved);
  save_rom_dataset(out + "/rom_dataset", r.data);
  save_rom_matrices(out + "/rom_oracle", r.oracle);
  save_rom_matrices(out + "/rom_recovered", r.recovered);
  write_resolved(out, resolved);
  info(cli, "reduced-order artifacts written to " + out);
  return 0;
}

int cmd_rom_verify(const ConfigView& root, const CliOptions& cli) {
  json resolved;
  resolved["command"] = "rom-verify";
  resolved["mode"] = cli.mode;
  double offdiag_tol = 1e-6, diag_tol = 1e-4, structure_tol = 1e-10;
  if (root.has("verify")) {
    ConfigView v = root.section("verify");
    v.allow_keys({"offdiag_tolerance", "diag_tolerance", "structure_tolerance"});
    offdiag_tol = v.number_or("offdiag_tolerance", offdiag_tol);
    diag_tol = v.number_or("diag_tolerance", diag_tol);
    structure_tol = v.number_or("structure_tolerance", structure_tol);
  }
  resolved["verify"] = {{"offdiag_tolerance", offdiag_tol},
                        {"diag_tolerance", diag_tol},
                        {"structure_tolerance", structure_tol}};

  RomBuildResult r = build_rom(root, cli, resolved);
  std::string out = resolve_output(root, cli, resolved);
  RomAgreement agree = compare_rom(r.oracle, r.recovered);
  RomStructureReport structure = check_rom_structure(r.recovered);

  ExperimentReport rep;
  rep.id = "rom_verify";
  rep.columns = {"metric", "value", "threshold", "pass"};
  auto row = [&rep](const std::string& name, double value, double bound, bool lower_bound) {
    bool ok = lower_bound ? value >= bound : value <= bound;
    rep.rows.push_back(
        {name, format_g17(value), format_g17(bound), ok ? "true" : "false"});
    rep.check(ok, name);
  };
  row("offdiag_mass", agree.offdiag_mass, offdiag_tol, false);
  row("offdiag_stiffness", agree.offdiag_stiffness, offdiag_tol, false);
  row("offdiag_boundary", agree.offdiag_boundary, offdiag_tol, false);
  row("diag_mass", agree.diag_mass, diag_tol, false);
  row("diag_stiffness", agree.diag_stiffness, diag_tol, false);
  row("diag_boundary", agree.diag_boundary, diag_tol, false);
  double mass_scale = std::max(1.0, std::abs(structure.mass_trace));
  double boundary_scale = std::max(1.0, std::abs(structure.boundary_trace));
  row("mass_hermiticity", structure.mass_hermiticity, structure_tol * mass_scale, false);
  row("boundary_hermiticity", structure.boundary_hermiticity, structure_tol * boundary_scale,
      false);
  row("min_mass_eigenvalue", structure.min_mass_eigenvalue,
      -structure_tol * structure.mass_trace, true);
  row("min_boundary_eigenvalue", structure.min_boundary_eigenvalue,
      -structure_tol * structure.boundary_trace, true);
  write_report(out, "rom_verify", rep);
  write_resolved(out, resolved);
  if (!rep.passed) {
    std::fprintf(stderr, "rom-verify: %zu check(s) failed\n", rep.failures.size());
    return 4;
  }
  return 0;
}

int cmd_invert(const ConfigView& root, const CliOptions& cli) {
  json resolved;
  resolved["command"] = "invert";
  auto mesh = parse_domain(root, resolved);
  int order = parse_order(root, resolved);
  std::vector<double> ks = parse_wavenumbers(root, resolved);
  SourceSpec src = parse_sources(root, resolved, /*required=*/true);
  if (src.positions.empty()) throw ConfigError("'sources.positions' must be nonempty");
  QTrueSpec qspec = parse_q_true(root, resolved);
  parse_solver(root, resolved);

  ConfigView inv = root.section("inversion");
  inv.allow_keys({"kind", "a", "p", "max_iterations", "gradient_tolerance", "param_nx",
                  "param_ny", "q0", "box_bound", "floor_delta", "fd_step"});
  std::string kind_name = inv.str_or("kind", "fwi");
  if (kind_name != "fwi" && kind_name != "rom")
    throw ConfigError("'inversion.kind' must be \"fwi\" or \"rom\"");
  double a = inv.number_or("a", 0.0);
  // p is either a number > 2 or the string "inf" for box-constraint mode.
  double p = 4.0;
  if (inv.has("p")) {
    if (inv.is_number("p")) {
      p = inv.number("p");
    } else {
      std::string s = inv.str("p");
      if (s != "inf" && s != "infinity")
        throw ConfigError("'inversion.p' must be a number > 2 or \"inf\"");
      p = std::numeric_limits<double>::infinity();
    }
  }
  if (!(p > 2.0)) throw ConfigError("'inversion.p' must be > 2");
  int max_iter = inv.integer_or("max_iterations", 100);
  double grad_tol = inv.number_or("gradient_tolerance", 1e-8);
  int pnx = inv.integer_or("param_nx", 8);
  int pny = inv.integer_or("param_ny", 8);
  double q0_value = inv.number_or("q0", 0.0);
  double box_bound = inv.number_or("box_bound", 1.0);
  double floor_delta = inv.number_or("floor_delta", 0.0);
  double fd_step = inv.number_or("fd_step", 1e-5);
  if (pnx < 1 || pny < 1) throw ConfigError("'inversion.param_nx'/'param_ny' must be >= 1");
  if (max_iter < 1) throw ConfigError("'inversion.max_iterations' must be >= 1");
  resolved["inversion"] = {{"kind", kind_name},
                           {"a", a},
                           {"p", std::isinf(p) ? json("inf") : json(p)},
                           {"max_iterations", max_iter},
                           {"gradient_tolerance", grad_tol},
                           {"param_nx", pnx},
                           {"param_ny", pny},
                           {"q0", q0_value},
                           {"box_bound", box_bound},
                           {"floor_delta", floor_delta},
                           {"fd_step", fd_step}};
  std::string out = resolve_output(root, cli, resolved);

  auto space = FunctionSpace::create(mesh, order);
  auto system = std::make_shared<SparseComplexSystem>(space);
  SourceSet sources = make_source_set(*space, src.positions, src.radius);
  WavenumberGrid grid(ks);
  ParamGrid param = ParamGrid::create(*mesh, pnx, pny);
  RVec q_true = q_true_grid_values(qspec, param);

  // Twin setup: reference data from the same forward model at q_true.
  info(cli, "generating reference data");
  SnapshotSet snapshots = generate_snapshots(system, param.field(q_true), grid, sources);
  ObjectiveConfig::Kind kind =
      kind_name == "rom" ? ObjectiveConfig::Kind::Rom : ObjectiveConfig::Kind::Fwi;
  ObjectiveConfig cfg(kind, system, grid, sources, param);
  cfg.a = a;
  cfg.p = p;
  cfg.box_bound = box_bound;
  cfg.floor_delta = floor_delta;
  cfg.threads = cli.threads;
  if (kind == ObjectiveConfig::Kind::Rom) {
    cfg.observed_stiffness =
        assemble_rom_oracle(snapshots, param.field(q_true), *system).stiffness_blocks;
  } else {
    cfg.observed_E = extract_data(snapshots, sources).E;
  }

  MinimizeOptions opts;
  opts.max_iter = max_iter;
  opts.grad_tol = grad_tol;
  opts.fd_step = fd_step;
  RVec q0 = RVec::Constant(static_cast<Eigen::Index>(param.cell_count()), q0_value);
  q0 = project_admissible(q0, cfg);
  info(cli, "minimizing (" + kind_name + ")");
  InversionResult result = minimize(cfg, q0, opts);

  save_param_values(out + "/q_true", q_true, param.fingerprint());
  save_param_values(out + "/q_est", result.q_est, param.fingerprint());

  ExperimentReport hist;
  hist.id = "inversion_history";
  hist.columns = {"iteration", "objective", "misfit", "pgrad_norm", "step"};
  for (std::size_t i = 0; i < result.objective_history.size(); ++i) {
    hist.rows.push_back(
        {std::to_string(i), format_g17(result.objective_history[i]),
         format_g17(result.misfit_history[i]),
         i < result.pgrad_norm_history.size() ? format_g17(result.pgrad_norm_history[i])
                                              : std::string(),
         i < result.step_history.size() ? format_g17(result.step_history[i])
                                        : std::string()});
  }
  write_report(out, "inversion_history", hist);

  ExperimentReport summary;
  summary.id = "inversion_summary";
  summary.columns = {"kind", "termination", "iterations", "misfit_initial", "misfit_final",
                     "misfit_ratio", "mesh_fingerprint", "param_fingerprint"};
  double m0 = result.misfit_history.front();
  double m1 = result.misfit_history.back();
  summary.rows.push_back({kind_name, result.termination, std::to_string(result.iterations),
                          format_g17(m0), format_g17(m1),
                          format_g17(m0 > 0.0 ? m1 / m0 : 0.0), mesh->fingerprint(),
                          param.fingerprint()});
  write_report(out, "inversion_summary", summary);
  write_resolved(out, resolved);
  info(cli, "termination: " + result.termination);
  return 0;
}

int cmd_experiment(const ConfigView& root, const CliOptions& cli, const std::string& name) {
  json resolved;
  resolved["command"] = "experiment";
  resolved["experiment_name"] = name;
  ExperimentThresholds thr = parse_thresholds(root, resolved);

  if (name == "weak_convergence" || name == "collectively_compact") {
    auto mesh = parse_domain(root, resolved);
    int order = parse_order(root, resolved);
    std::vector<double> ks = parse_wavenumbers(root, resolved);
    SourceSpec src = parse_sources(root, resolved, /*required=*/true);
    if (src.positions.empty()) throw ConfigError("'sources.positions' must be nonempty");
    ConfigView exp = root.section("experiment");
    exp.allow_keys({"amplitude", "n_list", "param_nx", "param_ny", "q0"});
    double amplitude = exp.number("amplitude");
    std::vector<int> n_list = exp.int_list("n_list");
    int pnx = exp.integer_or("param_nx", 8);
    int pny = exp.integer_or("param_ny", 8);
    double q0_value = exp.number_or("q0", 0.0);
    resolved["experiment"] = {{"amplitude", amplitude},
                              {"n_list", n_list},
                              {"param_nx", pnx},
                              {"param_ny", pny},
                              {"q0", q0_value}};
    std::string out = resolve_output(root, cli, resolved);

    auto space = FunctionSpace::create(mesh, order);
    auto system = std::make_shared<SparseComplexSystem>(space);
    SourceSet sources = make_source_set(*space, {src.positions[0]}, src.radius);
    ParamGrid param = ParamGrid::create(*mesh, pnx, pny);
    RVec q0 = RVec::Constant(static_cast<Eigen::Index>(param.cell_count()), q0_value);
    info(cli, "running oscillatory-contrast study");
    WeakConvergenceRun run =
        run_weak_convergence(system, param, q0, amplitude, n_list, ks[0], sources.loads[0]);
    ExperimentReport rep = name == "weak_convergence" ? weak_report_from_run(run, thr)
                                                      : cc_report_from_run(run, thr);
    write_report(out, name, rep);
    write_resolved(out, resolved);
    if (!rep.passed) {
      std::fprintf(stderr, "experiment %s: %zu check(s) failed\n", name.c_str(),
                   rep.failures.size());
      return 4;
    }
    return 0;
  }

  if (name == "h2_sweep") {
    auto mesh = parse_domain(root, resolved);
    int order = parse_order(root, resolved);
    if (order != 2) throw ConfigError("'element_order' must be 2 for the h2_sweep experiment");
    std::vector<double> ks = parse_wavenumbers(root, resolved);
    ConfigView exp = root.section("experiment");
    exp.allow_keys({"sigma", "center", "refine_check"});
    double sigma = exp.number_or("sigma", 0.1);
    if (!(sigma > 0.0)) throw ConfigError("'experiment.sigma' must be positive");
    std::vector<double> center = {0.5, 0.5};
    if (exp.has("center")) {
      center = exp.number_list("center");
      if (center.size() != 2) throw ConfigError("'experiment.center' must be [x, y]");
    }
    bool refine_check = exp.bool_or("refine_check", false);
    resolved["experiment"] = {
        {"sigma", sigma}, {"center", center}, {"refine_check", refine_check}};
    std::string out = resolve_output(root, cli, resolved);

    double cx = center[0], cy = center[1];
    auto f = [sigma, cx, cy](double x, double y) {
      double dx = x - cx, dy = y - cy;
      return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    };
    auto space = FunctionSpace::create(mesh, 2);
    info(cli, "running regularity sweep");
    H2Run base = run_h2_sweep(space, ks, f);
    ExperimentReport rep = h2_report_from_run(base, thr);
    write_report(out, "h2_sweep", rep);
    bool ok = rep.passed;
    if (refine_check) {
      auto fine_mesh = std::make_shared<Mesh>(refine_uniform(*mesh));
      H2Run fine = run_h2_sweep(FunctionSpace::create(fine_mesh, 2), ks, f);
      ExperimentReport stab = h2_stability_report(base, fine, thr);
      write_report(out, "h2_refinement", stab);
      ok = ok && stab.passed;
    }
    write_resolved(out, resolved);
    if (!ok) {
      std::fprintf(stderr, "experiment h2_sweep: threshold failure\n");
      return 4;
    }
    return 0;
  }

  if (name == "mms") {
    std::vector<double> ks = parse_wavenumbers(root, resolved);
    ConfigView exp = root.section("experiment");
    exp.allow_keys({"base_n", "refinements", "direction", "quadrature"});
    int base_n = exp.integer_or("base_n", 8);
    int refinements = exp.integer_or("refinements", 4);
    std::vector<double> dir = {1.0, 0.0};
    if (exp.has("direction")) {
      dir = exp.number_list("direction");
      if (dir.size() != 2) throw ConfigError("'experiment.direction' must be [x, y]");
    }
    std::string quad_name = exp.str_or("quadrature", "degree4");
    QuadOrder quad;
    if (quad_name == "degree4")
      quad = QuadOrder::Degree4;
    else if (quad_name == "degree2")
      quad = QuadOrder::Degree2;
    else
      throw ConfigError("'experiment.quadrature' must be \"degree2\" or \"degree4\"");
    resolved["experiment"] = {{"base_n", base_n},
                              {"refinements", refinements},
                              {"direction", dir},
                              {"quadrature", quad_name}};
    std::string out = resolve_output(root, cli, resolved);
    info(cli, "running manufactured-solution study");
    MmsRun run = run_mms(base_n, refinements, ks[0], dir[0], dir[1], quad);
    ExperimentReport rep = mms_report_from_run(run, thr);
    write_report(out, "mms", rep);
    write_resolved(out, resolved);
    if (!rep.passed) {
      std::fprintf(stderr, "experiment mms: %zu check(s) failed\n", rep.failures.size());
      return 4;
    }
    return 0;
  }

  throw ConfigError("unknown experiment '" + name +
                    "' (expected weak_convergence, collectively_compact, h2_sweep, or mms)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain scattering, reduced-order modeling, and inversion toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions cli;
  app.add_option("--config", cli.config_path, "Path to the JSON run configuration")
      ->required();
  app.add_option("--output", cli.output_override, "Output directory (overrides the config)");
  app.add_option("--threads", cli.threads, "Worker threads for snapshot generation")
      ->check(CLI::PositiveNumber);
  app.add_option("--mode", cli.mode, "Forward solve path: direct or vls")
      ->check(CLI::IsMember({"direct", "vls"}));
  app.add_flag("--verbose", cli.verbose, "Progress messages on stderr");

  auto* sub_mesh = app.add_subcommand("mesh", "Generate the mesh and its statistics");
  auto* sub_solve = app.add_subcommand("solve", "Solve the scattering problem");
  auto* sub_rom_build =
      app.add_subcommand("rom-build", "Build reduced-order data and matrices");
  auto* sub_rom_verify =
      app.add_subcommand("rom-verify", "Compare data-driven and oracle reduced models");
  auto* sub_invert = app.add_subcommand("invert", "Run a twin inversion");
  auto* sub_experiment = app.add_subcommand("experiment", "Run a named study");
  std::string experiment_name;
  sub_experiment->add_option("name", experiment_name, "Experiment name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json config = load_config(cli.config_path);
    ConfigView root(config, "");
    check_top_level(root);
    if (sub_mesh->parsed()) return cmd_mesh(root, cli);
    if (sub_solve->parsed()) return cmd_solve(root, cli);
    if (sub_rom_build->parsed()) return cmd_rom_build(root, cli);
    if (sub_rom_verify->parsed()) return cmd_rom_verify(root, cli);
    if (sub_invert->parsed()) return cmd_invert(root, cli);
    if (sub_experiment->parsed()) return cmd_experiment(root, cli, experiment_name);
    std::fprintf(stderr, "no command given\n");
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
