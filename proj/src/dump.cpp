#include "rsteer/dump.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "rsteer/error.hpp"

namespace rsteer {
namespace {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n) throw Error("core", ErrorCode::TruncatedFile, "dump ends unexpectedly");
  }

 private:
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t dump_header_size(std::string_view model_id) {
  return 4 + 2 + 1 + 4 + (4 + model_id.size()) + 8;
}

std::uint64_t dump_record_size(std::string_view query_id, std::uint32_t hidden_dim) {
  return (4 + query_id.size()) + 1 + 2 + 4 + 4ull * hidden_dim;
}

std::uint64_t write_dump(const ActivationSet& set, const std::filesystem::path& path) {
  set.validate();

  ByteWriter w;
  for (char c : kDumpMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kDumpVersion);
  w.u8(kDumpDtypeF32);
  w.u32(set.hidden_dim);
  w.str(set.model_id);
  w.u64(set.records.size());
  for (const auto& r : set.records) {
    w.str(r.query_id);
    w.u8(static_cast<std::uint8_t>(r.label));
    w.u16(r.layer);
    w.i32(r.position);
    for (Eigen::Index i = 0; i < r.vector.size(); ++i) w.f32(r.vector[i]);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("core", ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw Error("core", ErrorCode::IoError, "write failed for " + path.string());
  return w.bytes().size();
}

ActivationSet read_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("core", ErrorCode::IoError, "cannot open " + path.string());
  ByteReader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  r.need(4);
  std::string magic(4, '\0');
  for (auto& c : magic) c = static_cast<char>(r.u8());
  if (magic != kDumpMagic) throw Error("core", ErrorCode::BadMagic, "not an RSD1 dump: " + path.string());
  const std::uint16_t version = r.u16();
  if (version != kDumpVersion) {
    throw Error("core", ErrorCode::UnsupportedVersion, "unsupported dump version " + std::to_string(version));
  }
  const std::uint8_t dtype = r.u8();
  if (dtype != kDumpDtypeF32) {
    throw Error("core", ErrorCode::UnsupportedVersion, "unsupported dtype code " + std::to_string(dtype));
  }

  ActivationSet set;
  set.hidden_dim = r.u32();
  set.model_id = r.str();
  const std::uint64_t count = r.u64();
  if (count > 0 && set.hidden_dim == 0) {
    throw Error("core", ErrorCode::DimensionMismatch, "records present with hidden_dim 0");
  }

  for (std::uint64_t k = 0; k < count; ++k) {
    ActivationRecord rec;
    rec.query_id = r.str();
    const auto label = query_type_from_code(r.u8());
    if (!label) throw Error("core", ErrorCode::InvariantViolation, "record " + std::to_string(k) + " has bad label");
    rec.label = *label;
    rec.layer = r.u16();
    rec.position = r.i32();
    r.need(4ull * set.hidden_dim);
    rec.vector.resize(set.hidden_dim);
    for (std::uint32_t i = 0; i < set.hidden_dim; ++i) rec.vector[i] = r.f32();
    set.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw Error("core", ErrorCode::DimensionMismatch,
                std::to_string(r.remaining()) + " trailing bytes; file size inconsistent with hidden_dim");
  }
  set.refresh_layers();
  set.validate();
  return set;
}

}  // namespace rsteer
