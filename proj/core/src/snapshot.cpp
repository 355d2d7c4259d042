#include "dnncov/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dnncov/error.hpp"

namespace dnncov {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'O', 'V', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  const std::string& data() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t left() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (data_.size() - pos_ < n) throw Error(ErrorCode::kParse, source_ + ": truncated coverage snapshot");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{static_cast<unsigned char>(data_[pos_ + i])} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_snapshot(const CoverageState& state, const std::filesystem::path& path) {
  const TripletRegistry& reg = state.registry();
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u64(reg.fingerprint());
  w.u32(static_cast<std::uint32_t>(reg.model_name().size()));
  w.bytes(reg.model_name().data(), reg.model_name().size());
  w.u32(static_cast<std::uint32_t>(reg.layer_sizes().size()));
  for (std::size_t n : reg.layer_sizes()) w.u64(n);
  w.f64(state.threshold());
  w.u64(state.inputs_observed());
  w.u64(state.masks().size());
  w.bytes(state.masks().data(), state.masks().size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

CoverageState load_snapshot(const std::filesystem::path& path, const std::optional<TripletRegistry>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()), path.string());

  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw Error(ErrorCode::kParse, path.string() + ": not a coverage snapshot");
  }
  if (const auto v = r.u32(); v != kVersion) {
    throw Error(ErrorCode::kParse, path.string() + ": unsupported snapshot version " + std::to_string(v));
  }
  const std::uint64_t fingerprint = r.u64();
  const std::uint32_t name_len = r.u32();
  std::string name = r.bytes(name_len);
  const std::uint32_t layers = r.u32();
  if (layers > r.left() / 8) throw Error(ErrorCode::kParse, path.string() + ": truncated coverage snapshot");
  std::vector<std::size_t> sizes(layers);
  for (auto& n : sizes) n = static_cast<std::size_t>(r.u64());
  const double threshold = r.f64();
  const std::uint64_t inputs = r.u64();
  const std::uint64_t count = r.u64();
  if (count != r.left()) throw Error(ErrorCode::kParse, path.string() + ": mask array length mismatch");

  TripletRegistry registry(std::move(name), std::move(sizes));
  if (registry.fingerprint() != fingerprint) {
    throw Error(ErrorCode::kParse, path.string() + ": registry fingerprint does not match stored layout");
  }
  if (expected && expected->fingerprint() != fingerprint) {
    throw Error(ErrorCode::kInput, path.string() + ": snapshot belongs to a different model/registry");
  }
  if (registry.total_count() != count) {
    throw Error(ErrorCode::kParse, path.string() + ": mask count disagrees with layer sizes");
  }
  const std::string raw = r.bytes(count);
  std::vector<std::uint8_t> masks(raw.begin(), raw.end());
  return CoverageState::restore(std::move(registry), threshold, inputs, std::move(masks));
}

}  // namespace dnncov
