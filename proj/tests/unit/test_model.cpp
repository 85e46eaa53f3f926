#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ldrld/errors.hpp"
#include "ldrld/model.hpp"

using namespace ldrld;

namespace {
MlpSpec small_spec() { return {6, {8, 5}, 4, 17}; }
}  // namespace

TEST(Mlp, ShapesAndSeededInit) {
  Mlp a(small_spec()), b(small_spec());
  ASSERT_EQ(a.parameters().size(), 6u);
  EXPECT_EQ(a.parameters()[0].shape(), (Shape{6, 8}));
  EXPECT_EQ(a.parameters()[5].shape(), (Shape{4}));
  EXPECT_EQ(a.flat_parameters(), b.flat_parameters());
  auto other = small_spec();
  other.seed = 18;
  EXPECT_NE(Mlp(other).flat_parameters(), a.flat_parameters());
  for (double v : a.parameters()[0].data()) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(6.0));
}

TEST(Mlp, ForwardShapeAndErrors) {
  Mlp m(small_spec());
  auto out = m.forward(Tensor::matrix(3, 6, std::vector<double>(18, 0.1)));
  EXPECT_EQ(out.shape(), (Shape{3, 4}));
  EXPECT_THROW(m.forward(Tensor::matrix(3, 5, std::vector<double>(15, 0.1))), ShapeError);
  EXPECT_THROW(Mlp(MlpSpec{0, {}, 3, 0}), InvalidArgument);
  EXPECT_THROW(Mlp(MlpSpec{3, {0}, 3, 0}), InvalidArgument);
  EXPECT_THROW(Mlp(MlpSpec{3, {}, 1, 0}), InvalidArgument);
}

TEST(Mlp, CopiesAreDeep) {
  Mlp a(small_spec());
  Mlp b = a;
  b.parameters()[0].mutable_data()[0] += 1.0;
  EXPECT_NE(a.flat_parameters()[0], b.flat_parameters()[0]);
}

TEST(Mlp, ArgmaxTiesGoLow) {
  const std::vector<double> logits{1, 3, 3, 0, 0, 0};
  EXPECT_EQ(argmax_rows(logits, 3), (std::vector<std::size_t>{1, 0}));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Mlp m(small_spec());
  const auto bytes = serialize_checkpoint(m);
  EXPECT_EQ(bytes.substr(0, 9), "LDRLDCKPT");
  const Mlp back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back.spec(), m.spec());
  EXPECT_EQ(back.flat_parameters(), m.flat_parameters());
  EXPECT_EQ(serialize_checkpoint(back), bytes);

  const auto path = std::filesystem::temp_directory_path() / "ldrld_model_test.ckpt";
  save_checkpoint(m, path);
  EXPECT_EQ(load_checkpoint(path).flat_parameters(), m.flat_parameters());
}

TEST(Checkpoint, LittleEndianLayout) {
  Mlp m(MlpSpec{2, {}, 2, 5});
  const auto bytes = serialize_checkpoint(m);
  // version u32 = 1 right after the magic, then input_dim u64 = 2.
  EXPECT_EQ(bytes[9], '\x01');
  EXPECT_EQ(bytes[10], '\0');
  EXPECT_EQ(bytes[13], '\x02');
  // magic + version + input_dim + hidden count + classes + seed + buffer count
  // + (rows, cols, 4 doubles) + (rows, cols, 2 doubles)
  EXPECT_EQ(bytes.size(), 9u + 4 + 8 * 5 + (16 + 32) + (16 + 16));
}

TEST(Checkpoint, RejectsCorruptInput) {
  Mlp m(small_spec());
  auto bytes = serialize_checkpoint(m);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), DataError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), DataError);
  auto bad_version = bytes;
  bad_version[9] = 7;
  EXPECT_THROW(deserialize_checkpoint(bad_version), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.ckpt"), DataError);
}
