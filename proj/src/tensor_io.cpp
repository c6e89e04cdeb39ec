#include "crossview/tensor.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

namespace crossview {
namespace {

std::size_t element_count(const std::vector<std::int64_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) {
    if (d < 0) throw ShapeError("negative tensor dimension in " + format_dims(dims));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw TensorIoError("truncated tensor header");
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<std::make_unsigned_t<T>>(bytes[pos + i]) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(u);
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

}  // namespace

Tensor::Tensor(std::vector<std::int64_t> dims, float fill)
    : dims_(std::move(dims)), data_(element_count(dims_), fill) {}

Tensor::Tensor(std::vector<std::int64_t> dims, std::vector<float> values)
    : dims_(std::move(dims)), data_(std::move(values)) {
  if (data_.size() != element_count(dims_)) {
    throw ShapeError("tensor of dims " + format_dims(dims_) + " given " +
                     std::to_string(data_.size()) + " values");
  }
}

std::size_t Tensor::offset(std::initializer_list<std::int64_t> index) const {
  if (index.size() != dims_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " for tensor " +
                     format_dims(dims_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i < 0 || i >= dims_[axis]) throw ShapeError("tensor index out of range");
    off = off * static_cast<std::size_t>(dims_[axis]) + static_cast<std::size_t>(i);
    ++axis;
  }
  return off;
}

void Tensor::expect_dims(const std::vector<std::int64_t>& expected, const std::string& what) const {
  if (dims_ != expected) {
    throw ShapeError(what + ": expected dims " + format_dims(expected) + ", got " +
                     format_dims(dims_));
  }
}

std::string format_dims(const std::vector<std::int64_t>& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 8 * (1 + t.rank()) + 4 + 4 * t.size());
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  put_le<std::uint64_t>(out, t.rank());
  for (auto d : t.dims()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  put_le<std::uint32_t>(out, kDtypeFloat32);
  for (float v : t.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
    throw TensorIoError("bad tensor magic (expected CVT1)");
  }
  std::size_t pos = 4;
  auto rank = get_le<std::uint64_t>(bytes, pos);
  if (rank > 16) throw TensorIoError("implausible tensor rank " + std::to_string(rank));
  std::vector<std::int64_t> dims(rank);
  for (auto& d : dims) {
    auto v = get_le<std::uint64_t>(bytes, pos);
    if (v > (std::uint64_t{1} << 40)) throw TensorIoError("implausible tensor dimension");
    d = static_cast<std::int64_t>(v);
  }
  auto dtype = get_le<std::uint32_t>(bytes, pos);
  if (dtype != kDtypeFloat32) throw TensorIoError("unsupported dtype tag " + std::to_string(dtype));
  std::size_t n = element_count(dims);
  if (bytes.size() - pos != 4 * n) {
    throw TensorIoError("payload of " + std::to_string(bytes.size() - pos) + " bytes for dims " +
                        format_dims(dims));
  }
  std::vector<float> values(n);
  for (auto& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos));
  return Tensor(std::move(dims), std::move(values));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t,
                  const std::optional<nlohmann::json>& sidecar) {
  auto bytes = encode_tensor(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw TensorIoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw TensorIoError("write failed for " + path.string());
  if (sidecar) write_text_file(sidecar_path(path), sidecar->dump(2));
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorIoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const TensorIoError& e) {
    throw TensorIoError(path.string() + ": " + e.what());
  }
}

std::optional<nlohmann::json> read_sidecar(const std::filesystem::path& path) {
  auto p = sidecar_path(path);
  if (!std::filesystem::exists(p)) return std::nullopt;
  return nlohmann::json::parse(read_text_file(p));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw TensorIoError("cannot open " + path.string() + " for writing");
  os << text;
  if (text.empty() || text.back() != '\n') os << '\n';
  if (!os) throw TensorIoError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw TensorIoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace crossview
