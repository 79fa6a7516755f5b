#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tnnsim/model.hpp"

namespace tnnsim::data {

/// Unsigned-byte IDX tensor (type code 0x08).
struct IdxTensor {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> values;

  friend bool operator==(const IdxTensor&, const IdxTensor&) = default;
};

/// Parses the big-endian IDX container. Throws FormatError with the byte
/// offset on a bad magic, an unsupported element type or a size mismatch.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
IdxTensor load_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_idx(const IdxTensor& t);
void write_idx(const std::filesystem::path& path, const IdxTensor& t);

/// Images in (c, y, x) order, one label per image.
struct LabeledImages {
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;

  std::size_t count() const { return labels.size(); }
  friend bool operator==(const LabeledImages&, const LabeledImages&) = default;
};

struct Dataset {
  InputSpec shape;
  std::size_t num_classes = 10;
  LabeledImages train;
  LabeledImages test;

  /// Throws FormatError if image sizes or labels are inconsistent.
  void validate() const;
};

/// One CIFAR-10 binary batch: 3073-byte records, label then 32x32 planes R, G, B.
LabeledImages parse_cifar10_binary(std::span<const std::uint8_t> bytes);
LabeledImages load_cifar10_binary(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_cifar10_binary(const LabeledImages& batch);

/// Reads train-{images,labels}-idx*-ubyte and t10k-* from `dir`.
Dataset load_mnist(const std::filesystem::path& dir);
/// Reads data_batch_1..5.bin and test_batch.bin from `dir`.
Dataset load_cifar10(const std::filesystem::path& dir);

/// First `n` images of a split (or all if it is smaller).
LabeledImages head(const LabeledImages& split, std::size_t n, std::size_t image_size);

}  // namespace tnnsim::data
