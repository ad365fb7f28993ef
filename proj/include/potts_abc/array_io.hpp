#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybrid_gibbs.hpp"
#include "label_field.hpp"
#include "observation_field.hpp"

namespace potts_abc {

/// File I/O failure: missing, unreadable, unwritable or malformed file.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Array container, all integers little-endian:
//
//   offset  size  field
//        0     8  magic "POTTSARR"
//        8     4  u32 format version (1)
//       12     4  u32 element type (1 = u8 labels, 1-based; 2 = f64)
//       16     4  u32 ndim (1 to 3)
//       20    12  u32 dims[3], row-major with the last index fastest; unused = 1
//       32     8  u64 seed
//       40     8  u64 config hash
//       48     -  payload, prod(dims) elements
inline constexpr std::array<char, 8> kArrayMagic = {'P', 'O', 'T', 'T', 'S', 'A', 'R', 'R'};
inline constexpr std::uint32_t kArrayVersion = 1;
inline constexpr std::size_t kArrayHeaderBytes = 48;

enum class ElementType : std::uint32_t { labels_u8 = 1, float64 = 2 };

struct ArrayHeader {
  ElementType type = ElementType::float64;
  std::vector<std::size_t> dims;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  std::size_t count() const {
    std::size_t c = 1;
    for (auto d : dims) c *= d;
    return c;
  }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

inline std::string encode_header(const ArrayHeader& h) {
  if (h.dims.size() < 1 || h.dims.size() > 3) throw IoError("arrays must have 1 to 3 dimensions");
  std::string out(kArrayMagic.begin(), kArrayMagic.end());
  put_u32(out, kArrayVersion);
  put_u32(out, static_cast<std::uint32_t>(h.type));
  put_u32(out, static_cast<std::uint32_t>(h.dims.size()));
  for (std::size_t i = 0; i < 3; ++i)
    put_u32(out, static_cast<std::uint32_t>(i < h.dims.size() ? h.dims[i] : 1));
  put_u64(out, h.seed);
  put_u64(out, h.config_hash);
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline ArrayHeader decode_header(const std::string& bytes, const std::string& name) {
  if (bytes.size() < kArrayHeaderBytes || !std::equal(kArrayMagic.begin(), kArrayMagic.end(),
                                                      bytes.begin()))
    throw IoError("'" + name + "' is not an array container");
  if (get_le(bytes, 8, 4) != kArrayVersion) throw IoError("'" + name + "': unsupported version");
  ArrayHeader h;
  const auto type = get_le(bytes, 12, 4);
  if (type != 1 && type != 2) throw IoError("'" + name + "': unknown element type");
  h.type = static_cast<ElementType>(type);
  const auto ndim = get_le(bytes, 16, 4);
  if (ndim < 1 || ndim > 3) throw IoError("'" + name + "': bad dimension count");
  for (std::size_t i = 0; i < ndim; ++i) h.dims.push_back(get_le(bytes, 20 + 4 * i, 4));
  h.seed = get_le(bytes, 32, 8);
  h.config_hash = get_le(bytes, 40, 8);
  const std::size_t elem = h.type == ElementType::labels_u8 ? 1 : 8;
  if (bytes.size() != kArrayHeaderBytes + elem * h.count())
    throw IoError("'" + name + "': payload size does not match dims");
  return h;
}

}  // namespace detail

inline void write_label_array(const std::filesystem::path& path, const LabelField& z,
                              const std::vector<std::size_t>& dims, std::uint64_t seed,
                              std::uint64_t config_hash) {
  ArrayHeader h{ElementType::labels_u8, dims, seed, config_hash};
  if (h.count() != z.size()) throw IoError("label field size does not match dims");
  auto bytes = detail::encode_header(h);
  for (std::size_t n = 0; n < z.size(); ++n) bytes.push_back(static_cast<char>(z[n] + 1));
  detail::write_file(path, bytes);
}

inline void write_observation_array(const std::filesystem::path& path, const ObservationField& r,
                                    const std::vector<std::size_t>& dims, std::uint64_t seed,
                                    std::uint64_t config_hash) {
  ArrayHeader h{ElementType::float64, dims, seed, config_hash};
  if (h.count() != r.size()) throw IoError("observation field size does not match dims");
  auto bytes = detail::encode_header(h);
  for (std::size_t n = 0; n < r.size(); ++n)
    detail::put_u64(bytes, std::bit_cast<std::uint64_t>(r[n]));
  detail::write_file(path, bytes);
}

struct LabelArray {
  ArrayHeader header;
  std::vector<int> one_based;

  int max_label() const {
    int m = 0;
    for (int v : one_based) m = std::max(m, v);
    return m;
  }
  LabelField field(int k_classes) const { return LabelField::from_one_based(one_based, k_classes); }
};

inline LabelArray read_label_array(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  LabelArray a{detail::decode_header(bytes, path.string()), {}};
  if (a.header.type != ElementType::labels_u8)
    throw IoError("'" + path.string() + "' does not hold labels");
  a.one_based.resize(a.header.count());
  for (std::size_t n = 0; n < a.one_based.size(); ++n) {
    a.one_based[n] = static_cast<unsigned char>(bytes[kArrayHeaderBytes + n]);
    if (a.one_based[n] < 1) throw IoError("'" + path.string() + "': labels must be 1-based");
  }
  return a;
}

struct ObservationArray {
  ArrayHeader header;
  ObservationField values;
};

inline ObservationArray read_observation_array(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  auto h = detail::decode_header(bytes, path.string());
  if (h.type != ElementType::float64)
    throw IoError("'" + path.string() + "' does not hold real values");
  std::vector<double> v(h.count());
  for (std::size_t n = 0; n < v.size(); ++n)
    v[n] = std::bit_cast<double>(detail::get_le(bytes, kArrayHeaderBytes + 8 * n, 8));
  try {
    return {std::move(h), ObservationField(std::move(v))};
  } catch (const std::invalid_argument& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

inline std::string provenance_line(std::uint64_t config_hash, std::uint64_t seed) {
  std::ostringstream s;
  s << "# config_hash=" << std::hex << std::setw(16) << std::setfill('0') << config_hash
    << std::dec << ",seed=" << seed << "\n";
  return s.str();
}

/// 8-bit binary PGM of a 2D label map, labels spread evenly over 0..255.
inline void write_label_pgm(const std::filesystem::path& path, const LabelField& z,
                            const std::vector<std::size_t>& dims, std::uint64_t seed,
                            std::uint64_t config_hash) {
  if (dims.size() != 2) throw IoError("PGM export needs a 2D field");
  if (dims[0] * dims[1] != z.size()) throw IoError("label field size does not match dims");
  std::string bytes = "P5\n" + provenance_line(config_hash, seed) + std::to_string(dims[1]) + " " + std::to_string(dims[0]) + "\n255\n";
  const int K = z.classes();
  for (std::size_t n = 0; n < z.size(); ++n)
    bytes.push_back(static_cast<char>(K > 1 ? (255 * z[n]) / (K - 1) : 0));
  detail::write_file(path, bytes);
}

/// One row per recorded iteration: iteration, beta, beta_accepted, then the
/// model parameters in `trace.theta_names` order.
inline void write_trace_csv(const std::filesystem::path& path, const Trace& trace,
                            std::uint64_t config_hash, std::uint64_t seed) {
  std::ostringstream s;
  s << provenance_line(config_hash, seed) << "iteration,beta,beta_accepted";
  for (const auto& n : trace.theta_names) s << "," << n;
  s << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < trace.records(); ++i) {
    s << trace.iterations[i] << "," << trace.beta_samples[i] << ","
      << static_cast<int>(trace.beta_accepted[i]);
    for (double v : trace.theta_samples[i]) s << "," << v;
    s << "\n";
  }
  detail::write_file(path, s.str());
}

}  // namespace potts_abc
