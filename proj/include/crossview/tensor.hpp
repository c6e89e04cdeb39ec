#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace crossview {

/// Raised for shape inconsistencies between tensors, specs and parameters.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a tensor file cannot be read or written.
class TensorIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major float32 tensor. This is the storage type used for every
/// inter-stage artifact and for learned parameters; numerical kernels
/// convert to double internally.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> dims, float fill = 0.0f);
  Tensor(std::vector<std::int64_t> dims, std::vector<float> values);

  const std::vector<std::int64_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::int64_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  /// Flat offset of a multi-index; throws ShapeError on rank or range mismatch.
  std::size_t offset(std::initializer_list<std::int64_t> index) const;
  float& at(std::initializer_list<std::int64_t> index) { return data_[offset(index)]; }
  float at(std::initializer_list<std::int64_t> index) const { return data_[offset(index)]; }

  /// Throws ShapeError naming `what` when dims differ from `expected`.
  void expect_dims(const std::vector<std::int64_t>& expected, const std::string& what) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::int64_t> dims_;
  std::vector<float> data_;
};

std::string format_dims(const std::vector<std::int64_t>& dims);

// CVT1 file layout, all integers little-endian:
//   magic "CVT1" | rank u64 | dims u64 x rank | dtype u32 (1 = float32) | payload
// An optional JSON sidecar lives next to the file as "<file>.json".
inline constexpr char kTensorMagic[4] = {'C', 'V', 'T', '1'};
inline constexpr std::uint32_t kDtypeFloat32 = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t,
                  const std::optional<nlohmann::json>& sidecar = std::nullopt);
Tensor read_tensor(const std::filesystem::path& path);
std::optional<nlohmann::json> read_sidecar(const std::filesystem::path& path);

/// Writes text with a trailing newline, throwing TensorIoError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace crossview
