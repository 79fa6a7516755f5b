#include "tnnsim/ternary.hpp"

#include <string>

#include "tnnsim/errors.hpp"

namespace tnnsim {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

TernaryTensor::TernaryTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), size_(shape_product(shape_)) {
  planes_.resize(size_);
}

TernaryTensor::TernaryTensor(std::vector<std::size_t> shape, std::span<const std::int8_t> values)
    : TernaryTensor(std::move(shape)) {
  if (values.size() != size_) {
    throw DomainError("ternary tensor: " + std::to_string(values.size()) +
                      " values for shape of " + std::to_string(size_) + " elements");
  }
  for (std::size_t i = 0; i < size_; ++i) set(i, values[i]);
}

void TernaryTensor::set(std::size_t i, int v) {
  if (v < -1 || v > 1) throw DomainError("ternary tensor: value " + std::to_string(v) + " not ternary");
  const std::uint64_t bit = std::uint64_t{1} << (i % 64);
  std::uint64_t& p = planes_.plus[i / 64];
  std::uint64_t& m = planes_.minus[i / 64];
  p &= ~bit;
  m &= ~bit;
  if (v > 0) p |= bit;
  if (v < 0) m |= bit;
}

std::vector<std::int8_t> TernaryTensor::values() const {
  std::vector<std::int8_t> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = static_cast<std::int8_t>(get(i));
  return out;
}

std::vector<std::uint8_t> TernaryTensor::to_codes() const {
  std::vector<std::uint8_t> out((size_ + 3) / 4, 0);
  for (std::size_t i = 0; i < size_; ++i) {
    const int v = get(i);
    const std::uint8_t code = v > 0 ? 0b01 : (v < 0 ? 0b10 : 0b00);
    out[i / 4] |= static_cast<std::uint8_t>(code << (2 * (i % 4)));
  }
  return out;
}

TernaryTensor TernaryTensor::from_codes(std::vector<std::size_t> shape,
                                        std::span<const std::uint8_t> codes) {
  TernaryTensor t(std::move(shape));
  if (codes.size() < (t.size_ + 3) / 4) throw DomainError("ternary codes: buffer too short");
  for (std::size_t i = 0; i < t.size_; ++i) {
    const unsigned code = (codes[i / 4] >> (2 * (i % 4))) & 0b11u;
    if (code == 0b11) throw DomainError("ternary codes: reserved code 11 at element " + std::to_string(i));
    t.set(i, code == 0b01 ? 1 : (code == 0b10 ? -1 : 0));
  }
  return t;
}

std::size_t TernaryTensor::count_nonzero() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < planes_.plus.size(); ++k)
    n += static_cast<std::size_t>(__builtin_popcountll(planes_.plus[k] | planes_.minus[k]));
  return n;
}

}  // namespace tnnsim
