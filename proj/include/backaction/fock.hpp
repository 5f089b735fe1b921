#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace backaction {

/// Atoms per lattice site, |n_1 ... n_M>.
class OccupationVector {
public:
  OccupationVector() = default;
  explicit OccupationVector(std::vector<int> occupations);
  OccupationVector(std::initializer_list<int> occupations);

  std::size_t site_count() const noexcept { return n_.size(); }
  int atom_count() const noexcept;
  int operator[](std::size_t site) const { return n_[site]; }
  std::span<const int> values() const noexcept { return n_; }

  OccupationVector reversed() const;

  /// "201" for small occupations, "2,0,1" when any site holds ten or more.
  std::string to_string() const;

  friend bool operator==(const OccupationVector&, const OccupationVector&) = default;

private:
  std::vector<int> n_;
};

std::ostream& operator<<(std::ostream& os, const OccupationVector& n);

/// g[d] = sum_j n_j n_{j+d}. Equal signatures give equal scattering moduli.
struct PairCorrelationSignature {
  std::vector<std::int64_t> g;

  friend bool operator==(const PairCorrelationSignature&,
                         const PairCorrelationSignature&) = default;
  friend auto operator<=>(const PairCorrelationSignature&,
                          const PairCorrelationSignature&) = default;
};

PairCorrelationSignature signature(std::span<const int> occupations);
inline PairCorrelationSignature signature(const OccupationVector& n) {
  return signature(n.values());
}

/// binomial(N+M-1, N), or 0 if it does not fit in 64 bits.
std::uint64_t basis_dimension(int site_count, int atom_count) noexcept;

inline constexpr std::size_t kDefaultBasisCap = 5'000'000;

/// Fixed-N bosonic number basis over M sites in lexicographically descending
/// order, e.g. 300, 210, 201, 120, 111, ... for M = N = 3.
class FockBasis {
public:
  int site_count() const noexcept { return sites_; }
  int atom_count() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return size_; }

  std::span<const int> occupations(std::size_t index) const {
    return {flat_.data() + index * static_cast<std::size_t>(sites_),
            static_cast<std::size_t>(sites_)};
  }
  OccupationVector state(std::size_t index) const;

  /// Combinatorial rank, O(M). Throws ConfigError for vectors outside the basis.
  std::size_t index(std::span<const int> occupations) const;
  std::size_t index(const OccupationVector& n) const { return index(n.values()); }

  friend std::shared_ptr<const FockBasis>
  enumerate_basis(int site_count, int atom_count, std::size_t cap);

private:
  FockBasis() = default;

  int sites_ = 0;
  int atoms_ = 0;
  std::size_t size_ = 0;
  std::vector<int> flat_;
  // prefix_[k][t] = number of compositions of fewer than t atoms into k sites
  std::vector<std::vector<std::size_t>> prefix_;
};

/// Throws ConfigError for M < 1 or N < 1 and DimensionOverflowError above `cap`.
std::shared_ptr<const FockBasis> enumerate_basis(int site_count, int atom_count,
                                                 std::size_t cap = kDefaultBasisCap);

/// Partition of the basis by pair-correlation signature. Classes are ordered by
/// their first member in basis order.
struct EquivalenceClasses {
  std::vector<std::size_t> class_of;  // basis index -> class id
  std::vector<PairCorrelationSignature> signatures;
  std::vector<std::vector<std::size_t>> members;

  std::size_t size() const noexcept { return signatures.size(); }
};

EquivalenceClasses equivalence_classes(const FockBasis& basis);

/// CSV table: class_id,signature,member_count,members.
void write_classes_csv(std::ostream& os, const FockBasis& basis,
                       const EquivalenceClasses& classes);

} // namespace backaction
