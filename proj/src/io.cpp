#include "helmrom/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <utility>

#include "json.hpp"

#include "helmrom/errors.hpp"

namespace helmrom {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::uint64_t dtype_width(const std::string& dtype) {
  if (dtype == "f64") return 8;
  if (dtype == "u32") return 4;
  if (dtype == "c128") return 16;
  throw IoError("container: unknown dtype '" + dtype + "'");
}

std::uint64_t shape_count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) n *= d;
  return n;
}

void write_file_atomic(const std::string& path, const char* data, std::size_t n,
                       bool binary) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc
                                  : std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out.write(data, static_cast<std::streamsize>(n));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + tmp + " -> " + path + ": " + ec.message());
}

std::string read_file(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open: " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path);
  return data;
}

}  // namespace

std::uint64_t ArrayInfo::count() const { return shape_count(shape); }

ContainerWriter::ContainerWriter(std::string type, int version)
    : type_(std::move(type)), version_(version) {
  if (type_.empty()) throw InvalidArgumentError("container type must be nonempty");
}

void ContainerWriter::add_meta(const std::string& key, const std::string& value) {
  meta_[key] = value;
}

void ContainerWriter::add_raw(const std::string& name, const std::string& dtype,
                              const void* data, std::size_t bytes,
                              std::vector<std::uint64_t> shape) {
  if (name.empty()) throw InvalidArgumentError("array name must be nonempty");
  for (const auto& a : arrays_)
    if (a.name == name) throw InvalidArgumentError("duplicate array name: " + name);
  if (shape_count(shape) * dtype_width(dtype) != bytes)
    throw InvalidArgumentError("array shape does not match payload size: " + name);
  ArrayInfo info;
  info.name = name;
  info.dtype = dtype;
  info.shape = std::move(shape);
  info.offset = blob_.size();
  info.byte_size = bytes;
  arrays_.push_back(std::move(info));
  blob_.append(static_cast<const char*>(data), bytes);
}

void ContainerWriter::add_f64(const std::string& name, const double* data,
                              std::vector<std::uint64_t> shape) {
  std::size_t bytes = shape_count(shape) * 8;
  add_raw(name, "f64", data, bytes, std::move(shape));
}

void ContainerWriter::add_f64(const std::string& name, const std::vector<double>& v) {
  add_f64(name, v.data(), {static_cast<std::uint64_t>(v.size())});
}

void ContainerWriter::add_f64(const std::string& name, const RVec& v) {
  add_f64(name, v.data(), {static_cast<std::uint64_t>(v.size())});
}

void ContainerWriter::add_u32(const std::string& name, const std::uint32_t* data,
                              std::vector<std::uint64_t> shape) {
  std::size_t bytes = shape_count(shape) * 4;
  add_raw(name, "u32", data, bytes, std::move(shape));
}

void ContainerWriter::add_u32(const std::string& name, const std::vector<std::uint32_t>& v) {
  add_u32(name, v.data(), {static_cast<std::uint64_t>(v.size())});
}

void ContainerWriter::add_c128(const std::string& name, const cplx* data,
                               std::vector<std::uint64_t> shape) {
  std::size_t bytes = shape_count(shape) * 16;
  add_raw(name, "c128", data, bytes, std::move(shape));
}

void ContainerWriter::add_c128(const std::string& name, const CVec& v) {
  add_c128(name, v.data(), {static_cast<std::uint64_t>(v.size())});
}

void ContainerWriter::add_c128_matrix(const std::string& name, const CMat& m) {
  std::vector<cplx> row_major(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row_major[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  add_c128(name, row_major.data(),
           {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())});
}

void ContainerWriter::write(const std::string& path_base) const {
  json manifest;
  manifest["type"] = type_;
  manifest["version"] = version_;
  manifest["byte_order"] = "little";
  json arr = json::array();
  for (const auto& a : arrays_) {
    json e;
    e["name"] = a.name;
    e["dtype"] = a.dtype;
    e["shape"] = a.shape;
    arr.push_back(std::move(e));
  }
  manifest["arrays"] = std::move(arr);
  manifest["blob_bytes"] = blob_.size();
  manifest["blob_fingerprint"] = fingerprint_bytes(blob_.data(), blob_.size());
  json meta = json::object();
  for (const auto& kv : meta_) meta[kv.first] = kv.second;
  manifest["meta"] = std::move(meta);
  std::string text = manifest.dump(2);
  text += "\n";
  write_file_atomic(path_base + ".bin", blob_.data(), blob_.size(), true);
  write_file_atomic(path_base + ".json", text.data(), text.size(), false);
}

Container Container::load(const std::string& path_base) {
  std::string manifest_text = read_file(path_base + ".json", false);
  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw IoError("manifest parse error in " + path_base + ".json: " + e.what());
  }

  Container c;
  try {
    c.type_ = manifest.at("type").get<std::string>();
    c.version_ = manifest.at("version").get<int>();
    if (manifest.at("byte_order").get<std::string>() != "little")
      throw IoError("unsupported byte order in " + path_base + ".json");
    std::uint64_t offset = 0;
    for (const auto& e : manifest.at("arrays")) {
      ArrayInfo info;
      info.name = e.at("name").get<std::string>();
      info.dtype = e.at("dtype").get<std::string>();
      info.shape = e.at("shape").get<std::vector<std::uint64_t>>();
      info.offset = offset;
      info.byte_size = shape_count(info.shape) * dtype_width(info.dtype);
      offset += info.byte_size;
      for (const auto& prev : c.arrays_)
        if (prev.name == info.name)
          throw IoError("duplicate array name in manifest: " + info.name);
      c.arrays_.push_back(std::move(info));
    }
    if (manifest.contains("meta"))
      for (const auto& kv : manifest.at("meta").items())
        c.meta_[kv.key()] = kv.value().get<std::string>();

    c.blob_ = read_file(path_base + ".bin", true);
    std::uint64_t declared = manifest.at("blob_bytes").get<std::uint64_t>();
    if (c.blob_.size() != declared || declared != offset)
      throw IoError("blob size mismatch in " + path_base + ".bin");
    std::string fp = fingerprint_bytes(c.blob_.data(), c.blob_.size());
    if (fp != manifest.at("blob_fingerprint").get<std::string>())
      throw IoError("blob fingerprint mismatch in " + path_base + ".bin");
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + path_base + ".json: " + e.what());
  }
  return c;
}

bool Container::has(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return true;
  return false;
}

const ArrayInfo& Container::info(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return a;
  throw IoError("container '" + type_ + "': array not found: " + name);
}

const char* Container::payload(const std::string& name, const std::string& dtype,
                               std::uint64_t* count) const {
  const ArrayInfo& a = info(name);
  if (a.dtype != dtype)
    throw IoError("container '" + type_ + "': array " + name + " has dtype " + a.dtype +
                  ", expected " + dtype);
  *count = a.count();
  return blob_.data() + a.offset;
}

std::vector<double> Container::f64(const std::string& name) const {
  std::uint64_t n = 0;
  const char* p = payload(name, "f64", &n);
  std::vector<double> out(n);
  std::memcpy(out.data(), p, n * 8);
  return out;
}

std::vector<std::uint32_t> Container::u32(const std::string& name) const {
  std::uint64_t n = 0;
  const char* p = payload(name, "u32", &n);
  std::vector<std::uint32_t> out(n);
  std::memcpy(out.data(), p, n * 4);
  return out;
}

CVec Container::c128(const std::string& name) const {
  std::uint64_t n = 0;
  const char* p = payload(name, "c128", &n);
  CVec out(static_cast<Eigen::Index>(n));
  std::memcpy(out.data(), p, n * 16);
  return out;
}

CMat Container::c128_matrix(const std::string& name) const {
  const ArrayInfo& a = info(name);
  if (a.shape.size() != 2)
    throw IoError("container '" + type_ + "': array " + name + " is not 2-D");
  CVec flat = c128(name);
  CMat out(static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = flat[r * out.cols() + c];
  return out;
}

bool Container::has_meta(const std::string& key) const { return meta_.count(key) > 0; }

const std::string& Container::meta(const std::string& key) const {
  auto it = meta_.find(key);
  if (it == meta_.end())
    throw IoError("container '" + type_ + "': missing metadata key: " + key);
  return it->second;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  write_file_atomic(path, content.data(), content.size(), false);
}

std::string read_text(const std::string& path) { return read_file(path, false); }

namespace {

void expect_type(const Container& c, const std::string& want, const std::string& path_base) {
  if (c.type() != want)
    throw IoError("expected a '" + want + "' container at " + path_base + ", found '" +
                  c.type() + "'");
}

}  // namespace

void save_mesh(const std::string& path_base, const Mesh& mesh) {
  ContainerWriter w("mesh");
  std::vector<double> coords(mesh.vertices.size() * 2);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    coords[2 * i] = mesh.vertices[i].x;
    coords[2 * i + 1] = mesh.vertices[i].y;
  }
  w.add_f64("vertices", coords.data(), {mesh.vertices.size(), 2});
  std::vector<std::uint32_t> tris(mesh.triangles.size() * 3);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    for (int i = 0; i < 3; ++i) tris[3 * t + i] = mesh.triangles[t][i];
  w.add_u32("triangles", tris.data(), {mesh.triangles.size(), 3});
  std::vector<std::uint32_t> bed(mesh.boundary_edges.size() * 3);
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    bed[3 * e] = mesh.boundary_edges[e].a;
    bed[3 * e + 1] = mesh.boundary_edges[e].b;
    bed[3 * e + 2] = mesh.boundary_edges[e].tri;
  }
  w.add_u32("boundary_edges", bed.data(), {mesh.boundary_edges.size(), 3});
  std::vector<std::uint32_t> mask(mesh.is_boundary_vertex.begin(),
                                  mesh.is_boundary_vertex.end());
  w.add_u32("is_boundary_vertex", mask);
  w.add_meta("fingerprint", mesh.fingerprint());
  w.write(path_base);
}

Mesh load_mesh(const std::string& path_base) {
  Container c = Container::load(path_base);
  expect_type(c, "mesh", path_base);
  Mesh mesh;
  std::vector<double> coords = c.f64("vertices");
  mesh.vertices.resize(coords.size() / 2);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    mesh.vertices[i] = {coords[2 * i], coords[2 * i + 1]};
  std::vector<std::uint32_t> tris = c.u32("triangles");
  mesh.triangles.resize(tris.size() / 3);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    mesh.triangles[t] = {tris[3 * t], tris[3 * t + 1], tris[3 * t + 2]};
  std::vector<std::uint32_t> bed = c.u32("boundary_edges");
  mesh.boundary_edges.resize(bed.size() / 3);
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e)
    mesh.boundary_edges[e] = {bed[3 * e], bed[3 * e + 1], bed[3 * e + 2]};
  std::vector<std::uint32_t> mask = c.u32("is_boundary_vertex");
  mesh.is_boundary_vertex.assign(mask.begin(), mask.end());
  if (mesh.fingerprint() != c.meta("fingerprint"))
    throw IoError("mesh fingerprint mismatch at " + path_base);
  return mesh;
}

void save_wavefield(const std::string& path_base, const Wavefield& w) {
  if (!w.space) throw InvalidArgumentError("save_wavefield: field has no space");
  ContainerWriter out("wavefield");
  out.add_c128("dofs", w.dofs);
  out.add_meta("space_fingerprint", w.space->fingerprint());
  out.add_meta("mesh_fingerprint", w.space->mesh().fingerprint());
  out.add_meta("order", std::to_string(w.space->order()));
  out.write(path_base);
}

Wavefield load_wavefield(const std::string& path_base,
                         std::shared_ptr<const FunctionSpace> space) {
  Container c = Container::load(path_base);
  expect_type(c, "wavefield", path_base);
  if (!space) throw InvalidArgumentError("load_wavefield: null space");
  if (space->fingerprint() != c.meta("space_fingerprint"))
    throw IoError("wavefield at " + path_base + " belongs to a different space");
  CVec dofs = c.c128("dofs");
  if (dofs.size() != space->dof_count())
    throw IoError("wavefield dof count mismatch at " + path_base);
  return {std::move(space), std::move(dofs)};
}

namespace {

// Stacks per-(i,s) vectors as rows of one [count, len] c128 array.
void add_vector_stack(ContainerWriter& w, const std::string& name,
                      const std::vector<CVec>& vs, std::uint64_t len) {
  std::vector<cplx> flat(vs.size() * len);
  for (std::size_t t = 0; t < vs.size(); ++t) {
    if (static_cast<std::uint64_t>(vs[t].size()) != len)
      throw InvalidArgumentError("inconsistent vector lengths in " + name);
    for (std::uint64_t j = 0; j < len; ++j) flat[t * len + j] = vs[t][j];
  }
  w.add_c128(name, flat.data(), {vs.size(), len});
}

std::vector<CVec> read_vector_stack(const Container& c, const std::string& name) {
  const ArrayInfo& a = c.info(name);
  if (a.shape.size() != 2) throw IoError("array " + name + " is not 2-D");
  CVec flat = c.c128(name);
  std::vector<CVec> out(a.shape[0]);
  auto len = static_cast<Eigen::Index>(a.shape[1]);
  for (std::size_t t = 0; t < out.size(); ++t)
    out[t] = flat.segment(static_cast<Eigen::Index>(t) * len, len);
  return out;
}

// Stacks M x M blocks as one [count, M, M] c128 array, row-major blocks.
void add_block_stack(ContainerWriter& w, const std::string& name,
                     const std::vector<CMat>& blocks, std::uint64_t m) {
  std::vector<cplx> flat(blocks.size() * m * m);
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    if (static_cast<std::uint64_t>(blocks[t].rows()) != m ||
        static_cast<std::uint64_t>(blocks[t].cols()) != m)
      throw InvalidArgumentError("inconsistent block shapes in " + name);
    for (std::uint64_t r = 0; r < m; ++r)
      for (std::uint64_t s = 0; s < m; ++s)
        flat[(t * m + r) * m + s] = blocks[t](static_cast<Eigen::Index>(r),
                                              static_cast<Eigen::Index>(s));
  }
  w.add_c128(name, flat.data(), {blocks.size(), m, m});
}

std::vector<CMat> read_block_stack(const Container& c, const std::string& name) {
  const ArrayInfo& a = c.info(name);
  if (a.shape.size() != 3 || a.shape[1] != a.shape[2])
    throw IoError("array " + name + " is not a stack of square blocks");
  CVec flat = c.c128(name);
  auto m = static_cast<Eigen::Index>(a.shape[1]);
  std::vector<CMat> out(a.shape[0]);
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t].resize(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index s = 0; s < m; ++s)
        out[t](r, s) = flat[(static_cast<Eigen::Index>(t) * m + r) * m + s];
  }
  return out;
}

}  // namespace

void save_rom_dataset(const std::string& path_base, const RomDataset& data) {
  ContainerWriter w("rom_dataset");
  w.add_f64("k_values", data.k_values);
  w.add_u32("boundary_dofs", data.boundary_dofs);
  std::uint64_t nb = data.boundary_dofs.size();
  add_vector_stack(w, "traces", data.traces, nb);
  add_vector_stack(w, "dk_traces", data.dk_traces, nb);
  add_block_stack(w, "responses", data.E, data.n_sources);
  add_block_stack(w, "dk_responses", data.Edot, data.n_sources);
  w.add_meta("n_k", std::to_string(data.n_k));
  w.add_meta("n_sources", std::to_string(data.n_sources));
  w.add_meta("fingerprint", data.fingerprint());
  w.write(path_base);
}

RomDataset load_rom_dataset(const std::string& path_base) {
  Container c = Container::load(path_base);
  expect_type(c, "rom_dataset", path_base);
  RomDataset data;
  data.n_k = std::stoull(c.meta("n_k"));
  data.n_sources = std::stoull(c.meta("n_sources"));
  data.k_values = c.f64("k_values");
  data.boundary_dofs = c.u32("boundary_dofs");
  data.traces = read_vector_stack(c, "traces");
  data.dk_traces = read_vector_stack(c, "dk_traces");
  data.E = read_block_stack(c, "responses");
  data.Edot = read_block_stack(c, "dk_responses");
  if (data.k_values.size() != data.n_k || data.traces.size() != data.n_k * data.n_sources ||
      data.dk_traces.size() != data.traces.size() || data.E.size() != data.n_k ||
      data.Edot.size() != data.n_k)
    throw IoError("inconsistent array shapes in rom dataset at " + path_base);
  if (data.fingerprint() != c.meta("fingerprint"))
    throw IoError("rom dataset fingerprint mismatch at " + path_base);
  return data;
}

void save_rom_matrices(const std::string& path_base, const RomMatrices& rom) {
  ContainerWriter w("rom_matrices");
  add_block_stack(w, "mass", rom.mass_blocks, rom.n_sources);
  add_block_stack(w, "stiffness", rom.stiffness_blocks, rom.n_sources);
  add_block_stack(w, "boundary", rom.boundary_blocks, rom.n_sources);
  w.add_meta("n_k", std::to_string(rom.n_k));
  w.add_meta("n_sources", std::to_string(rom.n_sources));
  w.write(path_base);
}

RomMatrices load_rom_matrices(const std::string& path_base) {
  Container c = Container::load(path_base);
  expect_type(c, "rom_matrices", path_base);
  RomMatrices rom;
  rom.n_k = std::stoull(c.meta("n_k"));
  rom.n_sources = std::stoull(c.meta("n_sources"));
  rom.mass_blocks = read_block_stack(c, "mass");
  rom.stiffness_blocks = read_block_stack(c, "stiffness");
  rom.boundary_blocks = read_block_stack(c, "boundary");
  std::size_t want = rom.n_k * rom.n_k;
  if (rom.mass_blocks.size() != want || rom.stiffness_blocks.size() != want ||
      rom.boundary_blocks.size() != want)
    throw IoError("inconsistent block counts in rom matrices at " + path_base);
  return rom;
}

void save_param_values(const std::string& path_base, const RVec& values,
                       const std::string& grid_fingerprint) {
  ContainerWriter w("param_values");
  w.add_f64("values", values);
  w.add_meta("grid_fingerprint", grid_fingerprint);
  w.write(path_base);
}

RVec load_param_values(const std::string& path_base, std::string* grid_fingerprint) {
  Container c = Container::load(path_base);
  expect_type(c, "param_values", path_base);
  std::vector<double> v = c.f64("values");
  if (grid_fingerprint) *grid_fingerprint = c.meta("grid_fingerprint");
  RVec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

}  // namespace helmrom
