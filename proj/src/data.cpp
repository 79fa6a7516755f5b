#include "tnnsim/data.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <string>

#include "tnnsim/errors.hpp"

namespace tnnsim::data {

namespace {

constexpr std::size_t kCifarRecord = 3073;
constexpr std::size_t kCifarPixels = 3072;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) << 24 | static_cast<std::uint32_t>(b[at + 1]) << 16 |
         static_cast<std::uint32_t>(b[at + 2]) << 8 | static_cast<std::uint32_t>(b[at + 3]);
}

}  // namespace

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("idx: truncated magic", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("idx: bad magic", 0);
  if (bytes[2] != 0x08) throw FormatError("idx: unsupported element type", 2);
  const std::size_t rank = bytes[3];
  if (rank == 0) throw FormatError("idx: rank 0", 3);
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) throw FormatError("idx: truncated header", bytes.size());
  IdxTensor t;
  std::size_t n = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t d = be32(bytes, 4 + 4 * k);
    t.dims.push_back(d);
    if (d != 0 && n > (bytes.size() - header) / d)
      throw FormatError("idx: declared size exceeds file", 4 + 4 * k);
    n *= d;
  }
  if (bytes.size() - header < n) throw FormatError("idx: truncated payload", bytes.size());
  if (bytes.size() - header > n) throw FormatError("idx: trailing bytes", header + n);
  t.values.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return t;
}

IdxTensor load_idx(const std::filesystem::path& path) { return parse_idx(read_file(path)); }

std::vector<std::uint8_t> serialize_idx(const IdxTensor& t) {
  if (t.dims.empty() || t.dims.size() > 255) throw DomainError("idx: rank must be 1..255");
  std::size_t n = 1;
  for (std::size_t d : t.dims) {
    if (d > 0xffffffffu) throw DomainError("idx: dimension exceeds 32 bits");
    n *= d;
  }
  if (n != t.values.size()) throw DomainError("idx: value count does not match dims");
  std::vector<std::uint8_t> out{0, 0, 0x08, static_cast<std::uint8_t>(t.dims.size())};
  for (std::size_t d : t.dims)
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(d >> s));
  out.insert(out.end(), t.values.begin(), t.values.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxTensor& t) { write_file(path, serialize_idx(t)); }

void Dataset::validate() const {
  const std::size_t sz = shape.size();
  if (sz == 0) throw FormatError("dataset: empty image shape", 0);
  for (const LabeledImages* s : {&train, &test}) {
    if (s->images.size() != s->labels.size() * sz)
      throw FormatError("dataset: image bytes do not match label count", 0);
    for (std::size_t i = 0; i < s->labels.size(); ++i)
      if (s->labels[i] >= num_classes) throw FormatError("dataset: label out of range", i);
  }
}

LabeledImages parse_cifar10_binary(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % kCifarRecord != 0)
    throw FormatError("cifar10: size is not a multiple of 3073", bytes.size() - bytes.size() % kCifarRecord);
  LabeledImages out;
  const std::size_t n = bytes.size() / kCifarRecord;
  out.labels.reserve(n);
  out.images.reserve(n * kCifarPixels);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = i * kCifarRecord;
    if (bytes[at] >= 10) throw FormatError("cifar10: label byte >= 10", at);
    out.labels.push_back(bytes[at]);
    out.images.insert(out.images.end(), bytes.begin() + static_cast<std::ptrdiff_t>(at + 1),
                      bytes.begin() + static_cast<std::ptrdiff_t>(at + kCifarRecord));
  }
  return out;
}

LabeledImages load_cifar10_binary(const std::filesystem::path& path) {
  return parse_cifar10_binary(read_file(path));
}

std::vector<std::uint8_t> serialize_cifar10_binary(const LabeledImages& batch) {
  if (batch.images.size() != batch.count() * kCifarPixels)
    throw DomainError("cifar10: image bytes do not match label count");
  std::vector<std::uint8_t> out;
  out.reserve(batch.count() * kCifarRecord);
  for (std::size_t i = 0; i < batch.count(); ++i) {
    if (batch.labels[i] >= 10) throw DomainError("cifar10: label >= 10");
    out.push_back(batch.labels[i]);
    const auto* px = batch.images.data() + i * kCifarPixels;
    out.insert(out.end(), px, px + kCifarPixels);
  }
  return out;
}

namespace {

LabeledImages mnist_split(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const IdxTensor img = load_idx(images);
  const IdxTensor lab = load_idx(labels);
  if (img.dims.size() != 3 || img.dims[1] != 28 || img.dims[2] != 28)
    throw FormatError("mnist: " + images.string() + " is not N x 28 x 28", 4);
  if (lab.dims.size() != 1 || lab.dims[0] != img.dims[0])
    throw FormatError("mnist: " + labels.string() + " count does not match images", 4);
  return {img.values, lab.values};
}

}  // namespace

Dataset load_mnist(const std::filesystem::path& dir) {
  Dataset d;
  d.shape = {1, 28, 28};
  d.train = mnist_split(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  d.test = mnist_split(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  d.validate();
  return d;
}

Dataset load_cifar10(const std::filesystem::path& dir) {
  Dataset d;
  d.shape = {3, 32, 32};
  for (int k = 1; k <= 5; ++k) {
    LabeledImages b = load_cifar10_binary(dir / ("data_batch_" + std::to_string(k) + ".bin"));
    d.train.images.insert(d.train.images.end(), b.images.begin(), b.images.end());
    d.train.labels.insert(d.train.labels.end(), b.labels.begin(), b.labels.end());
  }
  d.test = load_cifar10_binary(dir / "test_batch.bin");
  d.validate();
  return d;
}

LabeledImages head(const LabeledImages& split, std::size_t n, std::size_t image_size) {
  n = std::min(n, split.count());
  LabeledImages out;
  out.labels.assign(split.labels.begin(), split.labels.begin() + static_cast<std::ptrdiff_t>(n));
  out.images.assign(split.images.begin(), split.images.begin() + static_cast<std::ptrdiff_t>(n * image_size));
  return out;
}

}  // namespace tnnsim::data
