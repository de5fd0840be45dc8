#include "helmrom/rom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "helmrom/errors.hpp"

namespace helmrom {

namespace {

double point_segment_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(a.x + t * vx - p.x, a.y + t * vy - p.y);
}

bool covered_by_mesh(const Mesh& mesh, const Vec2& p) {
  for (const auto& tri : mesh.triangles) {
    const Vec2& v0 = mesh.vertices[tri[0]];
    const Vec2& v1 = mesh.vertices[tri[1]];
    const Vec2& v2 = mesh.vertices[tri[2]];
    const double d = (v1.x - v0.x) * (v2.y - v0.y) - (v2.x - v0.x) * (v1.y - v0.y);
    const double l0 = ((v1.x - p.x) * (v2.y - p.y) - (v2.x - p.x) * (v1.y - p.y)) / d;
    const double l1 = ((v2.x - p.x) * (v0.y - p.y) - (v0.x - p.x) * (v2.y - p.y)) / d;
    if (l0 >= -1e-12 && l1 >= -1e-12 && 1.0 - l0 - l1 >= -1e-12) return true;
  }
  return false;
}

double boundary_distance(const Mesh& mesh, const Vec2& p) {
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& e : mesh.boundary_edges)
    dist = std::min(dist, point_segment_distance(mesh.vertices[e.a], mesh.vertices[e.b], p));
  return dist;
}

}  // namespace

WavenumberGrid::WavenumberGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgumentError("WavenumberGrid: empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0.0)) throw InvalidArgumentError("WavenumberGrid: wavenumbers must be positive");
    if (i > 0 && !(values_[i] > values_[i - 1]))
      throw InvalidArgumentError("WavenumberGrid: wavenumbers must be strictly increasing");
  }
}

double WavenumberGrid::min_spacing() const {
  double s = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < values_.size(); ++i) s = std::min(s, values_[i] - values_[i - 1]);
  return s;
}

SourceSet make_source_set(const FunctionSpace& space, const std::vector<Vec2>& positions,
                          double radius) {
  if (positions.empty()) throw InvalidArgumentError("make_source_set: no positions");
  double eps = radius > 0.0 ? radius : 2.0 * space.mesh().max_edge_length();
  for (std::size_t a = 0; a < positions.size(); ++a)
    for (std::size_t b = a + 1; b < positions.size(); ++b)
      if (positions[a].x == positions[b].x && positions[a].y == positions[b].y)
        throw InvalidArgumentError("make_source_set: positions must be pairwise distinct");
  const Mesh& mesh = space.mesh();
  for (const auto& p : positions)
    if (!covered_by_mesh(mesh, p) || boundary_distance(mesh, p) < eps)
      throw InvalidArgumentError("make_source_set: position (" + format_g17(p.x) + ", " +
                                 format_g17(p.y) +
                                 ") is not interior to the domain by the mollifier radius " +
                                 format_g17(eps));
  SourceSet set;
  set.positions = positions;
  set.radius = eps;
  set.loads.reserve(positions.size());
  for (const auto& p : positions) set.loads.push_back(assemble_point_source(space, p, eps));
  return set;
}

SnapshotSet generate_snapshots(const std::shared_ptr<const SparseComplexSystem>& system,
                               const CoefficientField& q_true, const WavenumberGrid& grid,
                               const SourceSet& sources, const SnapshotOptions& options) {
  if (sources.loads.empty()) throw InvalidArgumentError("generate_snapshots: empty source set");
  for (const auto& l : sources.loads)
    if (l.size() != system->space().dof_count())
      throw InvalidArgumentError("generate_snapshots: source load size mismatch");

  const std::size_t N = grid.size(), M = sources.size();
  SnapshotSet out;
  out.space = system->space_ptr();
  out.k_values = grid.values();
  out.n_sources = M;
  out.fields.assign(N * M, CVec());
  out.dk_fields.assign(N * M, CVec());

  for (std::size_t i = 0; i < N; ++i) {
    AssembledOperator op(system, grid[i], q_true);
    std::shared_ptr<AssembledOperator> bg;
    if (options.method == SnapshotOptions::Method::Ls && !q_true.is_identically_zero())
      bg = std::make_shared<AssembledOperator>(make_background(system, grid[i]));
    std::exception_ptr failure;
    parallel_for(M, options.threads, [&](std::size_t s) {
      try {
        CVec u;
        if (options.method == SnapshotOptions::Method::Ls && bg) {
          u = solve_ls(*bg, q_true, sources.loads[s], options.krylov).field.dofs;
        } else {
          u = op.solve(sources.loads[s]);
        }
        Wavefield w{system->space_ptr(), std::move(u)};
        out.fields[i * M + s] = w.dofs;
        out.dk_fields[i * M + s] = wavenumber_derivative(op, w).dofs;
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    });
    if (failure) {
      try {
        std::rethrow_exception(failure);
      } catch (const std::runtime_error& e) {
        throw ObjectiveEvaluationError("generate_snapshots: failure at k index " +
                                       std::to_string(i) + ": " + e.what());
      }
    }
  }
  return out;
}

RomDataset extract_data(const SnapshotSet& snapshots, const SourceSet& sources) {
  const std::size_t N = snapshots.n_k(), M = snapshots.n_sources;
  if (sources.size() != M) throw InvalidArgumentError("extract_data: source count mismatch");
  RomDataset data;
  data.n_k = N;
  data.n_sources = M;
  data.k_values = snapshots.k_values;
  data.boundary_dofs = snapshots.space->boundary_dofs();
  data.traces.reserve(N * M);
  data.dk_traces.reserve(N * M);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t s = 0; s < M; ++s) {
      data.traces.push_back(boundary_trace({snapshots.space, snapshots.u(i, s)}));
      data.dk_traces.push_back(boundary_trace({snapshots.space, snapshots.du(i, s)}));
    }
  }
  data.E.assign(N, CMat(M, M));
  data.Edot.assign(N, CMat(M, M));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t r = 0; r < M; ++r) {
      for (std::size_t s = 0; s < M; ++s) {
        // <f^(r), u> = l^(r)^T conj(u): anti-dual pairing with real loads.
        data.E[i](r, s) = sources.loads[r].dot(snapshots.u(i, s).conjugate());
        data.Edot[i](r, s) = sources.loads[r].dot(snapshots.du(i, s).conjugate());
      }
    }
  }
  return data;
}

std::string RomDataset::fingerprint() const {
  Fnv1a h;
  h.add_u64(n_k);
  h.add_u64(n_sources);
  for (double k : k_values) h.add_f64(k);
  for (auto d : boundary_dofs) h.add_u64(d);
  for (const auto& t : traces) h.add_matrix(t);
  for (const auto& t : dk_traces) h.add_matrix(t);
  for (const auto& e : E) h.add_matrix(e);
  for (const auto& e : Edot) h.add_matrix(e);
  return h.hex();
}

namespace {

CMat assemble_full(const std::vector<CMat>& blocks, std::size_t N, std::size_t M) {
  CMat full(N * M, N * M);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      // Block (i, j) holds (u_j^(r))^H X u_i^(s); as a Gram matrix its
      // rows belong to snapshot group j and its columns to group i.
      full.block(j * M, i * M, M, M) = blocks[i * N + j];
  return full;
}

}  // namespace

CMat RomMatrices::full_mass() const { return assemble_full(mass_blocks, n_k, n_sources); }
CMat RomMatrices::full_stiffness() const { return assemble_full(stiffness_blocks, n_k, n_sources); }
CMat RomMatrices::full_boundary() const { return assemble_full(boundary_blocks, n_k, n_sources); }

RomMatrices assemble_rom_oracle(const SnapshotSet& snapshots, const CoefficientField& q_true,
                                const SparseComplexSystem& system) {
  const std::size_t N = snapshots.n_k(), M = snapshots.n_sources;
  SpMat Mfull = system.unit_mass();
  if (!q_true.is_identically_zero()) Mfull = Mfull + system.contrast_mass(q_true);

  // One matrix-vector product per snapshot, then Gram dots.
  std::vector<CVec> Mu(N * M), Su(N * M), Bu(N * M);
  for (std::size_t a = 0; a < N * M; ++a) {
    Mu[a] = Mfull * snapshots.fields[a];
    Su[a] = system.stiffness() * snapshots.fields[a];
    Bu[a] = system.boundary_mass() * snapshots.fields[a];
  }

  RomMatrices rom;
  rom.n_k = N;
  rom.n_sources = M;
  rom.mass_blocks.assign(N * N, CMat(M, M));
  rom.stiffness_blocks.assign(N * N, CMat(M, M));
  rom.boundary_blocks.assign(N * N, CMat(M, M));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t r = 0; r < M; ++r) {
        for (std::size_t s = 0; s < M; ++s) {
          const CVec& ujr = snapshots.u(j, r);
          rom.mass_blocks[i * N + j](r, s) = ujr.dot(Mu[i * M + s]);
          rom.stiffness_blocks[i * N + j](r, s) = ujr.dot(Su[i * M + s]);
          rom.boundary_blocks[i * N + j](r, s) = ujr.dot(Bu[i * M + s]);
        }
      }
    }
  }
  return rom;
}

std::vector<CMat> boundary_blocks_from_traces(const RomDataset& data, const FunctionSpace& space) {
  if (data.boundary_dofs != space.boundary_dofs())
    throw InvalidArgumentError("boundary_blocks_from_traces: boundary dof layout mismatch");
  Eigen::MatrixXd G = boundary_gram(space);
  const std::size_t N = data.n_k, M = data.n_sources;
  std::vector<CMat> blocks(N * N, CMat(M, M));
  std::vector<CVec> Gt(N * M);
  for (std::size_t a = 0; a < N * M; ++a) Gt[a] = G * data.traces[a];
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t r = 0; r < M; ++r)
        for (std::size_t s = 0; s < M; ++s)
          blocks[i * N + j](r, s) = data.trace(j, r).dot(Gt[i * M + s]);
  return blocks;
}

RomMatrices recover_rom_from_data(const RomDataset& data, const std::vector<CMat>& boundary_blocks,
                                  const FunctionSpace& space, double spacing_guard) {
  const std::size_t N = data.n_k, M = data.n_sources;
  if (boundary_blocks.size() != N * N)
    throw InvalidArgumentError("recover_rom_from_data: boundary block count mismatch");
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j)
      if (std::abs(data.k_values[j] - data.k_values[i]) < spacing_guard)
        throw IllConditionedRecovery("recover_rom_from_data: wavenumbers " + std::to_string(i) +
                                     " and " + std::to_string(j) + " closer than guard " +
                                     format_g17(spacing_guard));

  Eigen::MatrixXd G = boundary_gram(space);
  if (data.boundary_dofs != space.boundary_dofs())
    throw InvalidArgumentError("recover_rom_from_data: boundary dof layout mismatch");

  RomMatrices rom;
  rom.n_k = N;
  rom.n_sources = M;
  rom.boundary_blocks = boundary_blocks;
  rom.mass_blocks.assign(N * N, CMat(M, M));
  rom.stiffness_blocks.assign(N * N, CMat(M, M));
  const cplx I(0.0, 1.0);

  for (std::size_t i = 0; i < N; ++i) {
    const double ki = data.k_values[i];
    for (std::size_t j = 0; j < N; ++j) {
      const double kj = data.k_values[j];
      const CMat& Bij = boundary_blocks[i * N + j];
      CMat& Mij = rom.mass_blocks[i * N + j];
      CMat& Sij = rom.stiffness_blocks[i * N + j];
      for (std::size_t r = 0; r < M; ++r) {
        for (std::size_t s = 0; s < M; ++s) {
          cplx Ejsr = data.E[j](s, r);
          if (i != j) {
            cplx num = Ejsr - std::conj(data.E[i](r, s)) + I * (ki + kj) * Bij(r, s);
            Mij(r, s) = num / (kj * kj - ki * ki);
          } else {
            // k_j -> k_i limit: derivative of numerator and denominator
            // in k_j. Bdot pairs dk-traces against traces through the
            // boundary Gram.
            cplx Edot_isr = data.Edot[i](s, r);
            cplx Bdot = data.dk_trace(i, r).dot(G * data.trace(i, s));
            cplx num_dot = Edot_isr + I * Bij(r, s) + 2.0 * I * ki * Bdot;
            Mij(r, s) = num_dot / (2.0 * ki);
          }
          Sij(r, s) = Ejsr + ki * ki * Mij(r, s) + I * ki * Bij(r, s);
        }
      }
    }
  }
  return rom;
}

RomStructureReport check_rom_structure(const RomMatrices& rom) {
  RomStructureReport rep;
  CMat Mf = rom.full_mass(), Sf = rom.full_stiffness(), Bf = rom.full_boundary();
  rep.mass_hermiticity = (Mf - Mf.adjoint()).cwiseAbs().maxCoeff();
  rep.stiffness_hermiticity = (Sf - Sf.adjoint()).cwiseAbs().maxCoeff();
  rep.boundary_hermiticity = (Bf - Bf.adjoint()).cwiseAbs().maxCoeff();

  Eigen::SelfAdjointEigenSolver<CMat> em(0.5 * (Mf + Mf.adjoint()));
  Eigen::SelfAdjointEigenSolver<CMat> eb(0.5 * (Bf + Bf.adjoint()));
  rep.min_mass_eigenvalue = em.eigenvalues().minCoeff();
  rep.min_boundary_eigenvalue = eb.eigenvalues().minCoeff();
  rep.mass_trace = Mf.trace().real();
  rep.boundary_trace = Bf.trace().real();

  const std::size_t N = rom.n_k;
  double worst = 0.0;
  auto block_sym = [&](const std::vector<CMat>& blocks) {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) {
        CMat diff = blocks[i * N + j] - blocks[j * N + i].transpose().conjugate();
        worst = std::max(worst, diff.cwiseAbs().maxCoeff());
      }
  };
  block_sym(rom.mass_blocks);
  block_sym(rom.stiffness_blocks);
  block_sym(rom.boundary_blocks);
  rep.block_symmetry = worst;
  return rep;
}

double RomAgreement::max_offdiag() const {
  return std::max({offdiag_mass, offdiag_stiffness, offdiag_boundary});
}

double RomAgreement::max_diag() const {
  return std::max({diag_mass, diag_stiffness, diag_boundary});
}

RomAgreement compare_rom(const RomMatrices& oracle, const RomMatrices& test) {
  if (oracle.n_k != test.n_k || oracle.n_sources != test.n_sources)
    throw InvalidArgumentError("compare_rom: shape mismatch");
  const std::size_t N = oracle.n_k;
  RomAgreement agr;
  auto scan = [&](const std::vector<CMat>& a, const std::vector<CMat>& b, double& offdiag,
                  double& diag) {
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        double denom = std::max(a[i * N + j].norm(), 1e-300);
        double rel = (a[i * N + j] - b[i * N + j]).norm() / denom;
        (i == j ? diag : offdiag) = std::max(i == j ? diag : offdiag, rel);
      }
    }
  };
  scan(oracle.mass_blocks, test.mass_blocks, agr.offdiag_mass, agr.diag_mass);
  scan(oracle.stiffness_blocks, test.stiffness_blocks, agr.offdiag_stiffness, agr.diag_stiffness);
  scan(oracle.boundary_blocks, test.boundary_blocks, agr.offdiag_boundary, agr.diag_boundary);
  return agr;
}

}  // namespace helmrom
