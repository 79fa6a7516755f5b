#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tnnsim {

/// Packed {-1, 0, +1} storage as two bit-planes: bit i of `plus` set means +1,
/// bit i of `minus` set means -1, neither means 0. Both set never occurs.
struct BitPlanes {
  std::vector<std::uint64_t> plus;
  std::vector<std::uint64_t> minus;

  static std::size_t words_for(std::size_t n) { return (n + 63) / 64; }

  void resize(std::size_t n) {
    plus.assign(words_for(n), 0);
    minus.assign(words_for(n), 0);
  }
};

/// Exact sum of element-wise ternary products over `words` 64-element blocks.
inline std::int64_t gxnor_dot_words(const std::uint64_t* wp, const std::uint64_t* wm,
                                    const std::uint64_t* xp, const std::uint64_t* xm,
                                    std::size_t words) {
  std::int64_t pos = 0;
  std::int64_t neg = 0;
  for (std::size_t k = 0; k < words; ++k) {
    pos += __builtin_popcountll((wp[k] & xp[k]) | (wm[k] & xm[k]));
    neg += __builtin_popcountll((wp[k] & xm[k]) | (wm[k] & xp[k]));
  }
  return pos - neg;
}

/// Shape plus ternary values, two bits per element.
class TernaryTensor {
 public:
  TernaryTensor() = default;
  /// All-zero tensor.
  explicit TernaryTensor(std::vector<std::size_t> shape);
  /// Throws DomainError if a value is outside {-1, 0, +1} or the count does not
  /// match the shape.
  TernaryTensor(std::vector<std::size_t> shape, std::span<const std::int8_t> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return size_; }

  int get(std::size_t i) const {
    const std::uint64_t bit = std::uint64_t{1} << (i % 64);
    if (planes_.plus[i / 64] & bit) return 1;
    if (planes_.minus[i / 64] & bit) return -1;
    return 0;
  }
  void set(std::size_t i, int v);

  std::vector<std::int8_t> values() const;
  const BitPlanes& planes() const { return planes_; }

  /// 2-bit codes, four elements per byte, element i in bits 2*(i%4)..2*(i%4)+1
  /// of byte i/4: 00 -> 0, 01 -> +1, 10 -> -1 (11 is invalid).
  std::vector<std::uint8_t> to_codes() const;
  /// Throws DomainError on the reserved code 11 or a short buffer.
  static TernaryTensor from_codes(std::vector<std::size_t> shape, std::span<const std::uint8_t> codes);

  std::size_t count_nonzero() const;

  friend bool operator==(const TernaryTensor& a, const TernaryTensor& b) {
    return a.shape_ == b.shape_ && a.planes_.plus == b.planes_.plus &&
           a.planes_.minus == b.planes_.minus;
  }

 private:
  std::vector<std::size_t> shape_;
  std::size_t size_ = 0;
  BitPlanes planes_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace tnnsim
