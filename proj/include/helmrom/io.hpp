#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "helmrom/fem.hpp"
#include "helmrom/mesh.hpp"
#include "helmrom/rom.hpp"
#include "helmrom/util.hpp"

namespace helmrom {

/// One named array inside a container: dtype f64 (8 bytes), u32 (4) or
/// c128 (16), row-major shape, and its slice of the binary blob.
struct ArrayInfo {
  std::string name;
  std::string dtype;
  std::vector<std::uint64_t> shape;
  std::uint64_t offset = 0;
  std::uint64_t byte_size = 0;

  std::uint64_t count() const;
};

/// Builder for the two-file artifact container: a JSON manifest
/// (`<base>.json`: type, version, array table, metadata, blob
/// fingerprint) plus a binary blob (`<base>.bin`) holding the arrays
/// little-endian in declared order. Both files are written atomically.
class ContainerWriter {
 public:
  explicit ContainerWriter(std::string type, int version = 1);

  void add_meta(const std::string& key, const std::string& value);
  void add_f64(const std::string& name, const double* data, std::vector<std::uint64_t> shape);
  void add_f64(const std::string& name, const std::vector<double>& v);
  void add_f64(const std::string& name, const RVec& v);
  void add_u32(const std::string& name, const std::uint32_t* data,
               std::vector<std::uint64_t> shape);
  void add_u32(const std::string& name, const std::vector<std::uint32_t>& v);
  void add_c128(const std::string& name, const cplx* data, std::vector<std::uint64_t> shape);
  void add_c128(const std::string& name, const CVec& v);
  /// Matrices are stored in row-major element order with shape [rows, cols].
  void add_c128_matrix(const std::string& name, const CMat& m);

  /// Writes `<path_base>.json` and `<path_base>.bin` (temp + rename).
  void write(const std::string& path_base) const;

 private:
  void add_raw(const std::string& name, const std::string& dtype, const void* data,
               std::size_t bytes, std::vector<std::uint64_t> shape);

  std::string type_;
  int version_ = 1;
  std::vector<ArrayInfo> arrays_;
  std::map<std::string, std::string> meta_;
  std::string blob_;
};

/// Loaded artifact container. The blob fingerprint recorded in the
/// manifest is verified on load; any structural defect raises IoError.
class Container {
 public:
  static Container load(const std::string& path_base);

  const std::string& type() const { return type_; }
  int version() const { return version_; }
  bool has(const std::string& name) const;
  const ArrayInfo& info(const std::string& name) const;
  const std::vector<ArrayInfo>& arrays() const { return arrays_; }

  std::vector<double> f64(const std::string& name) const;
  std::vector<std::uint32_t> u32(const std::string& name) const;
  CVec c128(const std::string& name) const;
  /// Reassembles a 2-D c128 array stored row-major.
  CMat c128_matrix(const std::string& name) const;

  bool has_meta(const std::string& key) const;
  const std::string& meta(const std::string& key) const;

 private:
  const char* payload(const std::string& name, const std::string& dtype,
                      std::uint64_t* count) const;

  std::string type_;
  int version_ = 1;
  std::vector<ArrayInfo> arrays_;
  std::map<std::string, std::string> meta_;
  std::string blob_;
};

/// Writes a text file via temp + rename in the target directory.
void write_text_atomic(const std::string& path, const std::string& content);
/// Reads a whole text file; throws IoError if unreadable.
std::string read_text(const std::string& path);

/// Mesh artifact: vertices, triangles, boundary edges, boundary mask, and
/// the mesh fingerprint (verified on load).
void save_mesh(const std::string& path_base, const Mesh& mesh);
Mesh load_mesh(const std::string& path_base);

/// Wavefield artifact: dof vector plus the fingerprint of the space it
/// lives on; loading requires the matching space.
void save_wavefield(const std::string& path_base, const Wavefield& w);
Wavefield load_wavefield(const std::string& path_base,
                         std::shared_ptr<const FunctionSpace> space);

/// Boundary-data artifact for the reduced-order pipeline (verified
/// against its recorded fingerprint on load).
void save_rom_dataset(const std::string& path_base, const RomDataset& data);
RomDataset load_rom_dataset(const std::string& path_base);

/// Reduced-order matrix artifact: the three N x N grids of M x M blocks.
void save_rom_matrices(const std::string& path_base, const RomMatrices& rom);
RomMatrices load_rom_matrices(const std::string& path_base);

/// Cellwise parameter vector tied to a parameter-grid fingerprint.
void save_param_values(const std::string& path_base, const RVec& values,
                       const std::string& grid_fingerprint);
RVec load_param_values(const std::string& path_base, std::string* grid_fingerprint = nullptr);

}  // namespace helmrom
