#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "tnnsim/data.hpp"
#include "tnnsim/errors.hpp"

using namespace tnnsim;
using namespace tnnsim::data;

namespace {

std::vector<std::uint8_t> handcrafted_idx() {
  return {0x00, 0x00, 0x08, 0x03, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3, 4, 5, 6, 7, 8};
}

std::vector<std::uint8_t> cifar_record(std::uint8_t label) {
  std::vector<std::uint8_t> r(3073);
  r[0] = label;
  for (std::size_t i = 0; i < 3072; ++i) r[1 + i] = static_cast<std::uint8_t>(i / 1024 * 100 + i % 7);
  return r;
}

}  // namespace

TEST(Idx, HandcraftedFile) {
  const auto t = parse_idx(handcrafted_idx());
  EXPECT_EQ(t.dims, (std::vector<std::size_t>{2, 2, 2}));
  EXPECT_EQ(t.values, (std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(serialize_idx(t), handcrafted_idx());
}

TEST(Idx, Malformed) {
  auto b = handcrafted_idx();
  b.pop_back();
  EXPECT_THROW(parse_idx(b), FormatError);
  b = handcrafted_idx();
  b.push_back(0);
  EXPECT_THROW(parse_idx(b), FormatError);
  b = handcrafted_idx();
  b[0] = 1;
  try {
    parse_idx(b);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  b = handcrafted_idx();
  b[2] = 0x0d;  // float element type
  EXPECT_THROW(parse_idx(b), FormatError);
  // header declaring 2^32-1 rows with no payload must fail without allocating
  std::vector<std::uint8_t> huge = {0, 0, 8, 1, 0xff, 0xff, 0xff, 0xff};
  EXPECT_THROW(parse_idx(huge), FormatError);
  EXPECT_THROW(parse_idx(std::vector<std::uint8_t>{0, 0}), FormatError);
}

TEST(Idx, FileRoundTrip) {
  IdxTensor t{{3, 5}, std::vector<std::uint8_t>(15)};
  for (std::size_t i = 0; i < 15; ++i) t.values[i] = static_cast<std::uint8_t>(i * 17);
  const auto path = std::filesystem::temp_directory_path() / "tnnsim_test.idx";
  write_idx(path, t);
  EXPECT_EQ(load_idx(path), t);
  std::filesystem::remove(path);
  EXPECT_THROW(load_idx(path), std::exception);
}

TEST(Cifar, SingleRecord) {
  const auto batch = parse_cifar10_binary(cifar_record(7));
  ASSERT_EQ(batch.count(), 1u);
  EXPECT_EQ(batch.labels[0], 7);
  ASSERT_EQ(batch.images.size(), 3072u);
  EXPECT_EQ(batch.images[0], 0);
  EXPECT_EQ(batch.images[1024], 100 + 1024 % 7);
  EXPECT_EQ(batch.images[2048 + 5], 200 + (2048 + 5) % 7);
}

TEST(Cifar, Malformed) {
  EXPECT_THROW(parse_cifar10_binary(cifar_record(10)), FormatError);
  auto r = cifar_record(1);
  r.pop_back();
  EXPECT_THROW(parse_cifar10_binary(r), FormatError);
}

TEST(Cifar, SyntheticRoundTrip) {
  LabeledImages b;
  for (std::uint8_t k = 0; k < 5; ++k) {
    b.labels.push_back(k);
    for (std::size_t i = 0; i < 3072; ++i) b.images.push_back(static_cast<std::uint8_t>(i * k + 3));
  }
  const auto bytes = serialize_cifar10_binary(b);
  EXPECT_EQ(bytes.size(), 5u * 3073u);
  EXPECT_EQ(parse_cifar10_binary(bytes), b);
}

TEST(Dataset, ValidateAndHead) {
  Dataset d;
  d.shape = {1, 2, 2};
  d.train.images = std::vector<std::uint8_t>(12, 1);
  d.train.labels = {0, 1, 9};
  d.test.images = std::vector<std::uint8_t>(4, 1);
  d.test.labels = {3};
  EXPECT_NO_THROW(d.validate());
  const auto h = head(d.train, 2, 4);
  EXPECT_EQ(h.count(), 2u);
  EXPECT_EQ(h.images.size(), 8u);
  EXPECT_EQ(head(d.train, 50, 4), d.train);
  d.test.labels = {10};
  EXPECT_THROW(d.validate(), FormatError);
  d.test.labels = {1, 2};
  EXPECT_THROW(d.validate(), FormatError);
}

TEST(Mnist, OfficialFiles) {
  const std::filesystem::path dir = TNNSIM_MNIST_DIR;
  if (!std::filesystem::exists(dir / "t10k-labels-idx1-ubyte")) GTEST_SKIP() << "MNIST not present in " << dir;
  const auto images = load_idx(dir / "t10k-images-idx3-ubyte");
  EXPECT_EQ(images.dims, (std::vector<std::size_t>{10000, 28, 28}));
  const auto d = load_mnist(dir);
  EXPECT_EQ(d.train.count(), 60000u);
  EXPECT_EQ(d.test.count(), 10000u);
  EXPECT_EQ(d.test.labels[0], 7);
  EXPECT_EQ(d.train.labels[0], 5);
  EXPECT_EQ(d.shape, (InputSpec{1, 28, 28}));
}

TEST(Mnist, MissingDirectory) { EXPECT_THROW(load_mnist("/nonexistent/mnist"), std::exception); }
