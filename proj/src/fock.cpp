#include "backaction/fock.hpp"

#include "backaction/errors.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace backaction {

OccupationVector::OccupationVector(std::vector<int> occupations) : n_(std::move(occupations)) {
  if (n_.empty())
    throw ConfigError("occupation vector must have at least one site");
  for (int v : n_)
    if (v < 0)
      throw ConfigError("occupation numbers must be non-negative");
}

OccupationVector::OccupationVector(std::initializer_list<int> occupations)
    : OccupationVector(std::vector<int>(occupations)) {}

int OccupationVector::atom_count() const noexcept {
  return std::accumulate(n_.begin(), n_.end(), 0);
}

OccupationVector OccupationVector::reversed() const {
  return OccupationVector(std::vector<int>(n_.rbegin(), n_.rend()));
}

std::string OccupationVector::to_string() const {
  const bool compact = std::all_of(n_.begin(), n_.end(), [](int v) { return v < 10; });
  std::string out;
  for (std::size_t j = 0; j < n_.size(); ++j) {
    if (!compact && j > 0)
      out += ',';
    out += std::to_string(n_[j]);
  }
  return out;
}

std::ostream& operator<<(std::ostream& os, const OccupationVector& n) {
  return os << '|' << n.to_string() << '>';
}

PairCorrelationSignature signature(std::span<const int> occupations) {
  const std::size_t m = occupations.size();
  PairCorrelationSignature sig{std::vector<std::int64_t>(m, 0)};
  for (std::size_t d = 0; d < m; ++d) {
    std::int64_t acc = 0;
    for (std::size_t j = 0; j + d < m; ++j)
      acc += static_cast<std::int64_t>(occupations[j]) * occupations[j + d];
    sig.g[d] = acc;
  }
  return sig;
}

std::uint64_t basis_dimension(int site_count, int atom_count) noexcept {
  if (site_count < 1 || atom_count < 0)
    return 0;
  // C(N+M-1, M-1) built incrementally; every partial product is itself a binomial.
  const auto k = static_cast<unsigned __int128>(site_count - 1);
  unsigned __int128 result = 1;
  for (unsigned __int128 i = 1; i <= k; ++i) {
    result = result * (static_cast<unsigned __int128>(atom_count) + i) / i;
    if (result > std::numeric_limits<std::uint64_t>::max())
      return 0;
  }
  return static_cast<std::uint64_t>(result);
}

OccupationVector FockBasis::state(std::size_t index) const {
  const auto occ = occupations(index);
  return OccupationVector(std::vector<int>(occ.begin(), occ.end()));
}

std::size_t FockBasis::index(std::span<const int> occupations) const {
  if (occupations.size() != static_cast<std::size_t>(sites_))
    throw ConfigError("occupation vector has wrong site count for this basis");
  std::size_t rank = 0;
  int remaining = atoms_;
  for (int j = 0; j < sites_; ++j) {
    const int v = occupations[j];
    if (v < 0 || v > remaining)
      throw ConfigError("occupation vector is not in this basis");
    rank += prefix_[sites_ - j - 1][remaining - v];
    remaining -= v;
  }
  if (remaining != 0)
    throw ConfigError("occupation vector is not in this basis");
  return rank;
}

namespace {

void enumerate_into(std::vector<int>& scratch, int site, int remaining, std::vector<int>& out) {
  const int sites = static_cast<int>(scratch.size());
  if (site == sites - 1) {
    scratch[site] = remaining;
    out.insert(out.end(), scratch.begin(), scratch.end());
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    scratch[site] = v;
    enumerate_into(scratch, site + 1, remaining - v, out);
  }
}

} // namespace

std::shared_ptr<const FockBasis> enumerate_basis(int site_count, int atom_count, std::size_t cap) {
  if (site_count < 1)
    throw ConfigError("site count M must be >= 1");
  if (atom_count < 1)
    throw ConfigError("atom count N must be >= 1");
  const std::uint64_t dim = basis_dimension(site_count, atom_count);
  if (dim == 0 || dim > cap) {
    std::ostringstream msg;
    msg << "Fock basis for M=" << site_count << ", N=" << atom_count << " has "
        << (dim == 0 ? std::string("more than 2^64") : std::to_string(dim))
        << " states, exceeding the cap of " << cap;
    throw DimensionOverflowError(msg.str());
  }

  std::shared_ptr<FockBasis> basis(new FockBasis());
  basis->sites_ = site_count;
  basis->atoms_ = atom_count;
  basis->size_ = static_cast<std::size_t>(dim);
  basis->flat_.reserve(basis->size_ * static_cast<std::size_t>(site_count));

  std::vector<int> scratch(static_cast<std::size_t>(site_count), 0);
  enumerate_into(scratch, 0, atom_count, basis->flat_);

  basis->prefix_.assign(static_cast<std::size_t>(site_count),
                        std::vector<std::size_t>(static_cast<std::size_t>(atom_count) + 2, 0));
  for (int k = 0; k < site_count; ++k) {
    auto& row = basis->prefix_[static_cast<std::size_t>(k)];
    for (int t = 1; t <= atom_count + 1; ++t) {
      const int r = t - 1;
      const std::size_t count =
          k == 0 ? (r == 0 ? 1 : 0) : static_cast<std::size_t>(basis_dimension(k, r));
      row[static_cast<std::size_t>(t)] = row[static_cast<std::size_t>(t) - 1] + count;
    }
  }
  return basis;
}

EquivalenceClasses equivalence_classes(const FockBasis& basis) {
  EquivalenceClasses out;
  out.class_of.resize(basis.size());
  std::map<PairCorrelationSignature, std::size_t> lookup;
  for (std::size_t u = 0; u < basis.size(); ++u) {
    auto sig = signature(basis.occupations(u));
    auto [it, inserted] = lookup.try_emplace(sig, out.signatures.size());
    if (inserted) {
      out.signatures.push_back(std::move(sig));
      out.members.emplace_back();
    }
    out.class_of[u] = it->second;
    out.members[it->second].push_back(u);
  }
  return out;
}

void write_classes_csv(std::ostream& os, const FockBasis& basis,
                       const EquivalenceClasses& classes) {
  os << "class_id,signature,member_count,members\n";
  for (std::size_t c = 0; c < classes.size(); ++c) {
    os << c << ",\"";
    const auto& g = classes.signatures[c].g;
    for (std::size_t d = 0; d < g.size(); ++d)
      os << (d ? " " : "") << g[d];
    os << "\"," << classes.members[c].size() << ",\"";
    for (std::size_t i = 0; i < classes.members[c].size(); ++i)
      os << (i ? " " : "") << basis.state(classes.members[c][i]).to_string();
    os << "\"\n";
  }
}

} // namespace backaction
