#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace lml {

// A subset of a small ground set {0, ..., 31}, stored as a bitmask with
// element k at bit k. Comparison is by bitmask, which is the canonical
// "binary counting" order used for subset-indexed vectors.
class Subset {
 public:
  using mask_type = std::uint32_t;

  constexpr Subset() = default;
  constexpr explicit Subset(mask_type bits) : bits_(bits) {}

  static constexpr Subset singleton(unsigned k) { return Subset(mask_type{1} << k); }
  static constexpr Subset full(unsigned n) {
    return Subset(n >= 32 ? ~mask_type{0} : (mask_type{1} << n) - 1);
  }
  static Subset of(const std::vector<unsigned>& elems) {
    mask_type b = 0;
    for (unsigned k : elems) b |= mask_type{1} << k;
    return Subset(b);
  }

  constexpr mask_type bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr unsigned size() const { return static_cast<unsigned>(std::popcount(bits_)); }
  constexpr bool contains(unsigned k) const { return (bits_ >> k) & 1u; }
  constexpr bool subset_of(Subset other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr unsigned lowest() const { return static_cast<unsigned>(std::countr_zero(bits_)); }

  constexpr Subset with(unsigned k) const { return Subset(bits_ | (mask_type{1} << k)); }
  constexpr Subset without(unsigned k) const { return Subset(bits_ & ~(mask_type{1} << k)); }

  constexpr Subset operator|(Subset o) const { return Subset(bits_ | o.bits_); }
  constexpr Subset operator&(Subset o) const { return Subset(bits_ & o.bits_); }
  constexpr Subset operator-(Subset o) const { return Subset(bits_ & ~o.bits_); }
  constexpr bool operator==(const Subset&) const = default;
  constexpr auto operator<=>(const Subset&) const = default;

  std::vector<unsigned> elements() const {
    std::vector<unsigned> out;
    out.reserve(size());
    for (mask_type b = bits_; b != 0; b &= b - 1) out.push_back(static_cast<unsigned>(std::countr_zero(b)));
    return out;
  }

 private:
  mask_type bits_ = 0;
};

// Orders subsets by size, then lexicographically on their sorted elements.
struct SizeLexLess {
  bool operator()(Subset a, Subset b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    // Lexicographic on sorted elements: first differing element decides.
    Subset::mask_type diff = a.bits() ^ b.bits();
    if (diff == 0) return false;
    unsigned k = static_cast<unsigned>(std::countr_zero(diff));
    return a.contains(k);
  }
};

}  // namespace lml
