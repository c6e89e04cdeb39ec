#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "crossview/csv.hpp"
#include "crossview/tensor.hpp"

namespace crossview {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("crossview_tensor_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Tensor random_tensor(std::vector<std::int64_t> dims, std::mt19937_64& rng) {
  Tensor t(std::move(dims));
  std::normal_distribution<float> d(0.0f, 10.0f);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

TEST(TensorIo, RoundTripIsByteExactUpToRankFour) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> side(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const int rank = trial % 5;
    std::vector<std::int64_t> dims;
    for (int r = 0; r < rank; ++r) dims.push_back(side(rng));
    Tensor t = random_tensor(dims, rng);
    auto bytes = encode_tensor(t);
    Tensor back = decode_tensor(bytes);
    EXPECT_EQ(back, t);
    EXPECT_EQ(encode_tensor(back), bytes);
  }
}

TEST(TensorIo, FileRoundTripWithSidecar) {
  auto dir = temp_dir("file");
  std::mt19937_64 rng(3);
  Tensor t = random_tensor({2, 3, 4, 5}, rng);
  nlohmann::json meta{{"grid", 41}};
  write_tensor(dir / "t.cvt", t, meta);
  EXPECT_EQ(read_tensor(dir / "t.cvt"), t);
  ASSERT_TRUE(read_sidecar(dir / "t.cvt").has_value());
  EXPECT_EQ(*read_sidecar(dir / "t.cvt"), meta);
  write_tensor(dir / "u.cvt", t);
  EXPECT_FALSE(read_sidecar(dir / "u.cvt").has_value());
}

TEST(TensorIo, HeaderLayout) {
  Tensor t({2}, std::vector<float>{1.0f, -2.0f});
  auto b = encode_tensor(t);
  ASSERT_EQ(b.size(), 4u + 8u + 8u + 4u + 8u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "CVT1");
  EXPECT_EQ(b[4], 1);  // rank, little-endian
  EXPECT_EQ(b[12], 2);  // first dim
  EXPECT_EQ(b[20], 1);  // dtype float32
}

TEST(TensorIo, RejectsCorruptInput) {
  Tensor t({3, 2}, 1.5f);
  auto b = encode_tensor(t);
  auto bad_magic = b;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_tensor(bad_magic), TensorIoError);
  auto truncated = b;
  truncated.pop_back();
  EXPECT_THROW(decode_tensor(truncated), TensorIoError);
  auto bad_dtype = b;
  bad_dtype[4 + 8 + 16] = 9;
  EXPECT_THROW(decode_tensor(bad_dtype), TensorIoError);
  EXPECT_THROW(decode_tensor(std::span<const std::uint8_t>(b.data(), 6)), TensorIoError);
  EXPECT_THROW(read_tensor("/nonexistent/crossview.cvt"), TensorIoError);
}

TEST(TensorIo, ShapeChecks) {
  Tensor t({2, 3});
  EXPECT_NO_THROW(t.expect_dims({2, 3}, "t"));
  EXPECT_THROW(t.expect_dims({3, 2}, "t"), ShapeError);
  EXPECT_THROW(t.at({2, 0}), ShapeError);
  EXPECT_THROW(t.at({0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_EQ(t.offset({1, 2}), 5u);
}

TEST(Csv, ParsesWithHeaderAndBlankLines) {
  auto rows = parse_numeric_csv("a,b\n1,2\n\n 3.5 , -4e1 \n", 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].line, 2);
  EXPECT_EQ(rows[1].line, 4);
  EXPECT_DOUBLE_EQ(rows[1].values[0], 3.5);
  EXPECT_DOUBLE_EQ(rows[1].values[1], -40.0);
}

TEST(Csv, ErrorsNameTheLine) {
  try {
    parse_numeric_csv("x,y\n1,2\n3,oops\n", 2, "pred.csv");
    FAIL() << "expected CsvError";
  } catch (const CsvError& e) {
    EXPECT_NE(std::string(e.what()).find("pred.csv:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_numeric_csv("1,2,3\n", 2), CsvError);
}

TEST(Csv, FormatNumberRoundTrips) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> d(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = d(rng);
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.4), "0.4");
}

}  // namespace
}  // namespace crossview
