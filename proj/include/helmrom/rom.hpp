#pragma once

#include <memory>
#include <string>
#include <vector>

#include "helmrom/forward.hpp"

namespace helmrom {

/// Strictly increasing positive wavenumbers k_1 < ... < k_N.
class WavenumberGrid {
 public:
  explicit WavenumberGrid(std::vector<double> values);
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double min_spacing() const;

 private:
  std::vector<double> values_;
};

/// Collocated sources/receivers: mollified point sources at interior
/// positions, realized as assembled load vectors of unit discrete mass.
struct SourceSet {
  std::vector<Vec2> positions;
  double radius = 0.0;
  std::vector<CVec> loads;

  std::size_t size() const { return positions.size(); }
};

/// Builds a SourceSet on a space. radius = 0 selects twice the maximum
/// mesh edge length. Positions must be pairwise distinct and interior to
/// the domain by at least the mollifier radius.
SourceSet make_source_set(const FunctionSpace& space, const std::vector<Vec2>& positions,
                          double radius = 0.0);

/// How snapshot wavefields are produced: direct sparse solves or the
/// iterative Lippmann-Schwinger path at a configurable tolerance.
struct SnapshotOptions {
  enum class Method { Direct, Ls };
  Method method = Method::Direct;
  KrylovConfig krylov{};
  int threads = 1;
};

/// Wavefields u_i^(s) and derivatives du_i^(s)/dk for all grid
/// wavenumbers i and sources s, flattened with index i*M + s.
struct SnapshotSet {
  std::shared_ptr<const FunctionSpace> space;
  std::vector<double> k_values;
  std::size_t n_sources = 0;
  std::vector<CVec> fields;
  std::vector<CVec> dk_fields;

  std::size_t n_k() const { return k_values.size(); }
  const CVec& u(std::size_t i, std::size_t s) const { return fields[i * n_sources + s]; }
  const CVec& du(std::size_t i, std::size_t s) const { return dk_fields[i * n_sources + s]; }
};

SnapshotSet generate_snapshots(const std::shared_ptr<const SparseComplexSystem>& system,
                               const CoefficientField& q_true, const WavenumberGrid& grid,
                               const SourceSet& sources, const SnapshotOptions& options = {});

/// Boundary measurements: traces and k-derivative traces of every
/// snapshot, receiver responses E_i^(r,s) = <f^(r), u_i^(s)> and their
/// k-derivatives Edot (the latter needed by diagonal-block recovery).
/// Pairings use the weak-form convention <f, u> = l_f^T conj(u).
struct RomDataset {
  std::size_t n_k = 0;
  std::size_t n_sources = 0;
  std::vector<double> k_values;
  std::vector<std::uint32_t> boundary_dofs;
  std::vector<CVec> traces;     // n_k * n_sources, index i*M + s
  std::vector<CVec> dk_traces;  // same layout
  std::vector<CMat> E;          // n_k matrices, E[i](r,s)
  std::vector<CMat> Edot;       // n_k matrices

  const CVec& trace(std::size_t i, std::size_t s) const { return traces[i * n_sources + s]; }
  const CVec& dk_trace(std::size_t i, std::size_t s) const { return dk_traces[i * n_sources + s]; }
  std::string fingerprint() const;
};

RomDataset extract_data(const SnapshotSet& snapshots, const SourceSet& sources);

/// The NM x NM reduced-order matrices, stored as N x N grids of M x M
/// blocks with [X_ij]_{rs} = (u_j^(r))^H X u_i^(s), flattened so that
/// block (i, j) sits at block position (row j, column i) of the full Gram
/// matrix.
struct RomMatrices {
  std::size_t n_k = 0;
  std::size_t n_sources = 0;
  std::vector<CMat> mass_blocks;       // n_k * n_k, index i*n_k + j
  std::vector<CMat> stiffness_blocks;  // same layout
  std::vector<CMat> boundary_blocks;   // same layout

  const CMat& mass(std::size_t i, std::size_t j) const { return mass_blocks[i * n_k + j]; }
  const CMat& stiffness(std::size_t i, std::size_t j) const {
    return stiffness_blocks[i * n_k + j];
  }
  const CMat& boundary(std::size_t i, std::size_t j) const {
    return boundary_blocks[i * n_k + j];
  }
  CMat full_mass() const;
  CMat full_stiffness() const;
  CMat full_boundary() const;
};

/// Volume/boundary-quadrature oracle: ROM blocks from full wavefields via
/// the assembled S, M_{1+q}, B matrices.
RomMatrices assemble_rom_oracle(const SnapshotSet& snapshots, const CoefficientField& q_true,
                                const SparseComplexSystem& system);

/// Boundary blocks from traces alone: [B_ij]_{rs} via the boundary-dof
/// Gram matrix of the trace space.
std::vector<CMat> boundary_blocks_from_traces(const RomDataset& data, const FunctionSpace& space);

/// Data-driven recovery of M and S from boundary/receiver data. The two
/// weak identities
///   (1) [S_ij]_{rs} - k_i^2 [M_ij]_{rs} - i k_i [B_ij]_{rs} = E_j^(s,r)
///   (2) [S_ij]_{rs} - k_j^2 [M_ij]_{rs} + i k_j [B_ij]_{rs} = conj(E_i^(r,s))
/// determine off-diagonal blocks exactly; diagonal blocks use the
/// k_j -> k_i limit evaluated with Edot and dk-trace data. Throws
/// IllConditionedRecovery if two grid wavenumbers are closer than
/// spacing_guard.
RomMatrices recover_rom_from_data(const RomDataset& data, const std::vector<CMat>& boundary_blocks,
                                  const FunctionSpace& space, double spacing_guard = 1e-8);

struct RomStructureReport {
  double min_mass_eigenvalue = 0.0;
  double min_boundary_eigenvalue = 0.0;
  double mass_trace = 0.0;
  double boundary_trace = 0.0;
  double mass_hermiticity = 0.0;       // max |X - X^H| entrywise
  double stiffness_hermiticity = 0.0;
  double boundary_hermiticity = 0.0;
  double block_symmetry = 0.0;         // max |[X_ij]_rs - conj([X_ji]_sr)|
};

RomStructureReport check_rom_structure(const RomMatrices& rom);

struct RomAgreement {
  double offdiag_mass = 0.0;  // max relative Frobenius block error, i != j
  double diag_mass = 0.0;     // same, i == j
  double offdiag_stiffness = 0.0;
  double diag_stiffness = 0.0;
  double offdiag_boundary = 0.0;
  double diag_boundary = 0.0;

  double max_offdiag() const;
  double max_diag() const;
};

/// Blockwise relative Frobenius distances of `test` against `oracle`.
RomAgreement compare_rom(const RomMatrices& oracle, const RomMatrices& test);

}  // namespace helmrom
