#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "blapose/error.hpp"

namespace blapose {

// File layout:
//   8 bytes   magic "BLAPTB1\n"
//   8 bytes   manifest length in bytes, little-endian uint64
//   manifest  UTF-8 JSON {"schema":1,"arrays":[{"name","dtype","shape"}],"metadata":{}}
//   payload   arrays in manifest order, row-major, little-endian
// dtype is "f32" for data files; "f64" is accepted for state that must
// round-trip exactly.
inline constexpr char kBundleMagic[8] = {'B', 'L', 'A', 'P', 'T', 'B', '1', '\n'};

enum class DType { f32, f64 };

inline const char* dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }
inline std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

struct TensorArray {
  std::string name;
  DType dtype = DType::f32;
  std::vector<std::int64_t> shape;
  std::vector<double> values;  // row-major; f32 arrays hold float-representable values

  std::int64_t element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
  }
};

class TensorBundle {
 public:
  nlohmann::json& metadata() noexcept { return metadata_; }
  const nlohmann::json& metadata() const noexcept { return metadata_; }
  const std::vector<TensorArray>& arrays() const noexcept { return arrays_; }

  bool contains(const std::string& name) const {
    for (const auto& a : arrays_)
      if (a.name == name) return true;
    return false;
  }

  const TensorArray& at(const std::string& name) const {
    for (const auto& a : arrays_)
      if (a.name == name) return a;
    throw SchemaError("bundle has no array named '" + name + "'");
  }

  // Values are rounded to the storage precision on insertion, so what is
  // kept in memory is exactly what a reader will see.
  void add(std::string name, std::vector<std::int64_t> shape, std::vector<double> values,
           DType dtype = DType::f32) {
    if (contains(name)) throw ValidationError("duplicate bundle array '" + name + "'");
    TensorArray a{std::move(name), dtype, std::move(shape), std::move(values)};
    if (a.element_count() != static_cast<std::int64_t>(a.values.size()))
      throw DimensionMismatch("bundle array '" + a.name + "' element count", a.element_count(),
                              static_cast<std::ptrdiff_t>(a.values.size()));
    if (dtype == DType::f32)
      for (auto& v : a.values) v = static_cast<double>(static_cast<float>(v));
    arrays_.push_back(std::move(a));
  }

  // Row-major copy of an Eigen matrix (vectors become 1-D arrays).
  template <typename Derived>
  void add_matrix(std::string name, const Eigen::DenseBase<Derived>& m, DType dtype = DType::f32,
                  bool as_vector = false) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    std::vector<std::int64_t> shape =
        as_vector ? std::vector<std::int64_t>{static_cast<std::int64_t>(m.size())}
                  : std::vector<std::int64_t>{m.rows(), m.cols()};
    add(std::move(name), std::move(shape), std::move(v), dtype);
  }

  // The array viewed as rows x cols (all but the last axis fold into rows).
  Eigen::MatrixXd matrix(const std::string& name) const {
    const auto& a = at(name);
    const std::int64_t cols = a.shape.empty() ? 1 : a.shape.back();
    const std::int64_t rows = cols == 0 ? 0 : a.element_count() / cols;
    Eigen::MatrixXd m(rows, cols);
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t c = 0; c < cols; ++c) m(r, c) = a.values[static_cast<std::size_t>(r * cols + c)];
    return m;
  }

  Eigen::VectorXd vector(const std::string& name) const {
    const auto& a = at(name);
    return Eigen::Map<const Eigen::VectorXd>(a.values.data(), static_cast<Eigen::Index>(a.values.size()));
  }

  nlohmann::json manifest() const {
    nlohmann::json arrays = nlohmann::json::array();
    for (const auto& a : arrays_)
      arrays.push_back({{"name", a.name}, {"dtype", dtype_name(a.dtype)}, {"shape", a.shape}});
    return {{"schema", 1}, {"arrays", arrays}, {"metadata", metadata_}};
  }

  std::string serialize() const {
    const std::string manifest_text = manifest().dump();
    std::string out(kBundleMagic, sizeof kBundleMagic);
    append_u64(out, manifest_text.size());
    out += manifest_text;
    for (const auto& a : arrays_) {
      for (double v : a.values) {
        if (a.dtype == DType::f32)
          append_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        else
          append_le(out, std::bit_cast<std::uint64_t>(v));
      }
    }
    return out;
  }

  static TensorBundle deserialize(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kBundleMagic, sizeof kBundleMagic) != 0)
      throw SchemaError("not a tensor bundle (bad magic)");
    const std::uint64_t mlen = read_le<std::uint64_t>(bytes, 8);
    if (16 + mlen > bytes.size()) throw SchemaError("bundle manifest truncated");
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(bytes.substr(16, mlen));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("bundle manifest: ") + e.what());
    }
    TensorBundle b;
    std::size_t pos = 16 + mlen;
    try {
      if (manifest.at("schema").get<int>() != 1) throw SchemaError("unsupported bundle schema");
      b.metadata_ = manifest.value("metadata", nlohmann::json::object());
      for (const auto& entry : manifest.at("arrays")) {
        TensorArray a;
        a.name = entry.at("name").get<std::string>();
        const auto dtype = entry.at("dtype").get<std::string>();
        if (dtype == "f32")
          a.dtype = DType::f32;
        else if (dtype == "f64")
          a.dtype = DType::f64;
        else
          throw SchemaError("unsupported dtype '" + dtype + "'");
        a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
        for (auto d : a.shape)
          if (d < 0) throw SchemaError("negative extent in array '" + a.name + "'");
        const auto count = static_cast<std::size_t>(a.element_count());
        const std::size_t need = count * dtype_size(a.dtype);
        if (pos + need > bytes.size()) throw SchemaError("bundle payload truncated at '" + a.name + "'");
        a.values.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
          if (a.dtype == DType::f32)
            a.values[i] = std::bit_cast<float>(read_le<std::uint32_t>(bytes, pos + 4 * i));
          else
            a.values[i] = std::bit_cast<double>(read_le<std::uint64_t>(bytes, pos + 8 * i));
        }
        pos += need;
        if (b.contains(a.name)) throw SchemaError("duplicate array name '" + a.name + "'");
        b.arrays_.push_back(std::move(a));
      }
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("bundle manifest: ") + e.what());
    }
    if (pos != bytes.size()) throw SchemaError("bundle payload has trailing bytes");
    return b;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    const std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + path.string());
  }

  static TensorBundle load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open bundle " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      return deserialize(bytes);
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ": " + e.what());
    }
  }

 private:
  template <typename U>
  static void append_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  static void append_u64(std::string& out, std::uint64_t v) { append_le(out, v); }

  template <typename U>
  static U read_le(const std::string& bytes, std::size_t pos) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    return v;
  }

  nlohmann::json metadata_ = nlohmann::json::object();
  std::vector<TensorArray> arrays_;
};

}  // namespace blapose
