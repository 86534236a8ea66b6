/*
   Copyright 2026 The qanneal Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qanneal/error.hpp"
#include "qanneal/rng.hpp"

namespace qanneal {

/// Longitudinal field used throughout the small-system experiments.
inline constexpr double kDefaultField = 0.1;

/// Two classical energies closer than this are treated as equal.
inline constexpr double kEnergyTolerance = 1e-9;

/// Largest instance `enumerate_ground_states` will touch.
inline constexpr int kMaxEnumerationSpins = 24;

enum class Topology { Complete, Square2D, Custom };

struct Bond {
  int i = 0;
  int j = 0;
  double coupling = 0.0;

  friend bool operator==(const Bond&, const Bond&) = default;
};

/// A classical configuration of +-1 spins.
class SpinConfiguration {
 public:
  SpinConfiguration() = default;

  explicit SpinConfiguration(std::vector<int> spins) : spins_(std::move(spins)) {
    for (int s : spins_) {
      if (s != 1 && s != -1) throw ContractError("spin values must be +1 or -1");
    }
  }

  static SpinConfiguration all_up(int n) { return SpinConfiguration(std::vector<int>(n, 1)); }

  /// Basis-state index convention shared with the exact solvers: bit k set <=> spin k is -1.
  static SpinConfiguration from_index(int n, std::uint64_t index) {
    std::vector<int> s(n);
    for (int k = 0; k < n; ++k) s[k] = ((index >> k) & 1U) ? -1 : 1;
    return SpinConfiguration(std::move(s));
  }

  std::uint64_t to_index() const {
    std::uint64_t idx = 0;
    for (std::size_t k = 0; k < spins_.size(); ++k) {
      if (spins_[k] < 0) idx |= (std::uint64_t{1} << k);
    }
    return idx;
  }

  static SpinConfiguration random(int n, Rng& rng) {
    std::vector<int> s(n);
    for (auto& v : s) v = rng.spin();
    return SpinConfiguration(std::move(s));
  }

  int size() const noexcept { return static_cast<int>(spins_.size()); }
  int operator[](int k) const { return spins_[k]; }
  void flip(int k) { spins_[k] = -spins_[k]; }
  std::span<const int> spins() const noexcept { return spins_; }

  SpinConfiguration flipped_globally() const {
    auto s = spins_;
    for (auto& v : s) v = -v;
    return SpinConfiguration(std::move(s));
  }

  double magnetization() const {
    double m = 0.0;
    for (int s : spins_) m += s;
    return spins_.empty() ? 0.0 : m / static_cast<double>(spins_.size());
  }

  friend bool operator==(const SpinConfiguration&, const SpinConfiguration&) = default;
  friend auto operator<=>(const SpinConfiguration&, const SpinConfiguration&) = default;

 private:
  std::vector<int> spins_;
};

/// Ising cost function E = -sum_{i<j} J_ij s_i s_j - h sum_i s_i.
///
/// Couplings are stored once per unordered pair (i < j) and mirrored into a
/// compressed adjacency structure, so a single-spin flip costs O(degree).
class IsingInstance {
 public:
  IsingInstance() = default;

  IsingInstance(int n_spins, std::vector<Bond> bonds, double field = kDefaultField,
                Topology topology = Topology::Custom, int side = 0, bool periodic = false)
      : n_(n_spins), h_(field), topology_(topology), side_(side), periodic_(periodic) {
    if (n_spins < 1) throw ContractError("instance needs at least one spin");
    for (auto& b : bonds) {
      if (b.i == b.j) throw ContractError("self-coupling (" + std::to_string(b.i) + ") is not allowed");
      if (b.i < 0 || b.j < 0 || b.i >= n_ || b.j >= n_) {
        throw ContractError("bond index out of range");
      }
      if (b.i > b.j) std::swap(b.i, b.j);
    }
    std::sort(bonds.begin(), bonds.end(),
              [](const Bond& a, const Bond& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
    for (std::size_t k = 1; k < bonds.size(); ++k) {
      if (bonds[k].i == bonds[k - 1].i && bonds[k].j == bonds[k - 1].j) {
        throw ContractError("duplicate coupling for pair (" + std::to_string(bonds[k].i) + "," +
                            std::to_string(bonds[k].j) + ")");
      }
    }
    bonds_ = std::move(bonds);
    build_adjacency();
  }

  int n_spins() const noexcept { return n_; }
  double field() const noexcept { return h_; }
  Topology topology() const noexcept { return topology_; }
  int side() const noexcept { return side_; }
  bool periodic() const noexcept { return periodic_; }
  std::span<const Bond> bonds() const noexcept { return bonds_; }

  std::span<const int> neighbors(int i) const {
    return {neighbor_.data() + offset_[i], neighbor_.data() + offset_[i + 1]};
  }
  std::span<const double> neighbor_couplings(int i) const {
    return {weight_.data() + offset_[i], weight_.data() + offset_[i + 1]};
  }

  /// J_ij (symmetric); zero when the pair is not coupled.
  double coupling(int i, int j) const {
    check_index(i);
    check_index(j);
    auto nb = neighbors(i);
    auto it = std::lower_bound(nb.begin(), nb.end(), j);
    if (it == nb.end() || *it != j) return 0.0;
    return weight_[offset_[i] + static_cast<std::size_t>(it - nb.begin())];
  }

  double energy(const SpinConfiguration& s) const {
    check_size(s);
    double e = 0.0;
    for (const auto& b : bonds_) e -= b.coupling * s[b.i] * s[b.j];
    double m = 0.0;
    for (int k = 0; k < n_; ++k) m += s[k];
    return e - h_ * m;
  }

  /// sum_j J_ij s_j + h; the flip cost of spin i is 2 s_i * local_field.
  double local_field(std::span<const int> s, int i) const {
    double f = h_;
    const std::size_t end = offset_[i + 1];
    for (std::size_t k = offset_[i]; k < end; ++k) f += weight_[k] * s[neighbor_[k]];
    return f;
  }

  double flip_delta(const SpinConfiguration& s, int i) const {
    return 2.0 * s[i] * local_field(s.spins(), i);
  }

  void check_size(const SpinConfiguration& s) const {
    if (s.size() != n_) {
      throw ContractError("configuration has " + std::to_string(s.size()) + " spins, instance has " +
                          std::to_string(n_));
    }
  }

  void check_index(int i) const {
    if (i < 0 || i >= n_) throw ContractError("spin index " + std::to_string(i) + " out of range");
  }

  friend bool operator==(const IsingInstance& a, const IsingInstance& b) {
    return a.n_ == b.n_ && a.h_ == b.h_ && a.bonds_ == b.bonds_;
  }

 private:
  void build_adjacency() {
    std::vector<std::vector<std::pair<int, double>>> adj(n_);
    for (const auto& b : bonds_) {
      adj[b.i].emplace_back(b.j, b.coupling);
      adj[b.j].emplace_back(b.i, b.coupling);
    }
    offset_.assign(n_ + 1, 0);
    neighbor_.clear();
    weight_.clear();
    for (int i = 0; i < n_; ++i) {
      std::sort(adj[i].begin(), adj[i].end());
      for (auto [j, w] : adj[i]) {
        neighbor_.push_back(j);
        weight_.push_back(w);
      }
      offset_[i + 1] = neighbor_.size();
    }
  }

  int n_ = 0;
  double h_ = kDefaultField;
  Topology topology_ = Topology::Custom;
  int side_ = 0;
  bool periodic_ = false;
  std::vector<Bond> bonds_;
  std::vector<std::size_t> offset_{0};
  std::vector<int> neighbor_;
  std::vector<double> weight_;
};

inline double classical_energy(const IsingInstance& instance, const SpinConfiguration& config) {
  return instance.energy(config);
}

// ---------------------------------------------------------------------------
// Generators

inline IsingInstance make_ferromagnet(int n, double j, double field = kDefaultField) {
  if (n < 1) throw ContractError("ferromagnet needs n >= 1");
  if (!(j > 0.0)) throw ContractError("ferromagnetic coupling must be positive");
  std::vector<Bond> bonds;
  bonds.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) bonds.push_back({a, b, j});
  return IsingInstance(n, std::move(bonds), field, Topology::Complete);
}

/// Eight-spin frustrated model: ferromagnetic paths 3-4-6 and 3-5-6 compete with
/// a direct antiferromagnetic bond 3-6; spins 1,2 and 7,8 hang off as pendant
/// chains. Labels here are 0-based, so the "3-6" pair is (2, 5).
inline IsingInstance make_frustrated8(double field = kDefaultField) {
  std::vector<Bond> bonds = {
      {0, 1, 1.0}, {1, 2, 1.0}, {5, 6, 1.0}, {6, 7, 1.0},   // pendant chains
      {2, 3, 1.0}, {3, 5, 1.0}, {2, 4, 1.0}, {4, 5, 1.0},   // indirect paths via 4 and 5
      {2, 5, -1.0},                                          // direct antiferromagnetic bond
  };
  return IsingInstance(8, std::move(bonds), field, Topology::Custom);
}

/// Sherrington-Kirkpatrick: every pair coupled with J_ij ~ N(0, 1/n).
inline IsingInstance make_sk(int n, RngSeed seed, double field = kDefaultField) {
  if (n < 2) throw ContractError("SK instance needs n >= 2");
  Rng rng(seed);
  const double sigma = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<Bond> bonds;
  bonds.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) bonds.push_back({a, b, sigma * rng.normal()});
  return IsingInstance(n, std::move(bonds), field, Topology::Complete);
}

/// Two-dimensional Edwards-Anderson glass, Gaussian N(0,1) bonds on the square lattice.
/// Site (x, y) has index y * side + x.
inline IsingInstance make_ea2d(int side, bool periodic, RngSeed seed, double field = kDefaultField) {
  if (side < 2) throw ContractError("EA lattice needs side >= 2");
  Rng rng(seed);
  std::vector<Bond> bonds;
  auto idx = [side](int x, int y) { return y * side + x; };
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      // right and down neighbours; wrap only when periodic. A side-2 periodic
      // lattice would double-count the wrapped bond, so it is merged.
      if (x + 1 < side) {
        bonds.push_back({idx(x, y), idx(x + 1, y), rng.normal()});
      } else if (periodic && side > 2) {
        bonds.push_back({idx(x, y), idx(0, y), rng.normal()});
      }
      if (y + 1 < side) {
        bonds.push_back({idx(x, y), idx(x, y + 1), rng.normal()});
      } else if (periodic && side > 2) {
        bonds.push_back({idx(x, y), idx(x, 0), rng.normal()});
      }
    }
  }
  return IsingInstance(side * side, std::move(bonds), field, Topology::Square2D, side, periodic);
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

enum class CertificateMethod { Exhaustive, LongSA };

struct GroundStateCertificate {
  double energy = std::numeric_limits<double>::infinity();
  std::vector<SpinConfiguration> configurations;
  CertificateMethod method = CertificateMethod::Exhaustive;

  bool contains(const SpinConfiguration& s) const {
    return std::find(configurations.begin(), configurations.end(), s) != configurations.end();
  }
};

/// Classical energies of every basis state, indexed by `SpinConfiguration::to_index`.
inline std::vector<double> diagonal_energies(const IsingInstance& instance) {
  const int n = instance.n_spins();
  if (n > kMaxEnumerationSpins) {
    throw SizeLimitError("basis enumeration limited to " + std::to_string(kMaxEnumerationSpins) +
                         " spins, instance has " + std::to_string(n));
  }
  const std::uint64_t dim = std::uint64_t{1} << n;
  std::vector<double> energies(dim);
  // Gray-code walk: consecutive states differ by one spin.
  std::vector<int> s(n, 1);
  double e = instance.energy(SpinConfiguration(s));
  std::uint64_t index = 0;
  energies[0] = e;
  for (std::uint64_t g = 1; g < dim; ++g) {
    const int k = std::countr_zero(g);
    e += 2.0 * s[k] * instance.local_field(s, k);
    s[k] = -s[k];
    index ^= (std::uint64_t{1} << k);
    energies[index] = e;
  }
  return energies;
}

inline GroundStateCertificate enumerate_ground_states(const IsingInstance& instance) {
  const int n = instance.n_spins();
  if (n > kMaxEnumerationSpins) {
    throw SizeLimitError("exhaustive ground-state search is limited to " +
                         std::to_string(kMaxEnumerationSpins) + " spins, instance has " + std::to_string(n));
  }
  const auto energies = diagonal_energies(instance);
  const double emin = *std::min_element(energies.begin(), energies.end());
  GroundStateCertificate cert;
  cert.energy = emin;
  cert.method = CertificateMethod::Exhaustive;
  for (std::uint64_t idx = 0; idx < energies.size(); ++idx) {
    if (energies[idx] <= emin + kEnergyTolerance) {
      cert.configurations.push_back(SpinConfiguration::from_index(n, idx));
    }
  }
  return cert;
}

/// Basis indices of the certificate's configurations.
inline std::vector<std::uint64_t> ground_indices(const GroundStateCertificate& cert) {
  std::vector<std::uint64_t> out;
  out.reserve(cert.configurations.size());
  for (const auto& c : cert.configurations) out.push_back(c.to_index());
  return out;
}

// ---------------------------------------------------------------------------
// Text serialization: "N", "h", then "i j J_ij" lines (0-indexed). Lines that
// start with '#' are comments; "# topology square2d <side> <periodic>" and
// "# topology complete" restore the topology tag.

inline void write_instance(std::ostream& os, const IsingInstance& instance) {
  auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
  if (instance.topology() == Topology::Complete) {
    os << "# topology complete\n";
  } else if (instance.topology() == Topology::Square2D) {
    os << "# topology square2d " << instance.side() << ' ' << (instance.periodic() ? 1 : 0) << '\n';
  }
  os << instance.n_spins() << '\n' << instance.field() << '\n';
  for (const auto& b : instance.bonds()) os << b.i << ' ' << b.j << ' ' << b.coupling << '\n';
  os.precision(old_prec);
}

inline IsingInstance read_instance(std::istream& is) {
  Topology topology = Topology::Custom;
  int side = 0;
  bool periodic = false;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::istringstream cs(line.substr(first + 1));
      std::string key, kind;
      cs >> key >> kind;
      if (key == "topology" && kind == "complete") topology = Topology::Complete;
      if (key == "topology" && kind == "square2d") {
        int p = 0;
        cs >> side >> p;
        topology = Topology::Square2D;
        periodic = p != 0;
      }
      continue;
    }
    lines.push_back(line);
  }
  if (lines.size() < 2) throw ConfigError("instance file needs N and h lines");
  int n = 0;
  double h = 0.0;
  {
    std::istringstream ns(lines[0]);
    if (!(ns >> n) || n < 1) throw ConfigError("bad spin count line: '" + lines[0] + "'");
    std::istringstream hs(lines[1]);
    if (!(hs >> h)) throw ConfigError("bad field line: '" + lines[1] + "'");
  }
  std::vector<Bond> bonds;
  for (std::size_t k = 2; k < lines.size(); ++k) {
    std::istringstream bs(lines[k]);
    Bond b;
    if (!(bs >> b.i >> b.j >> b.coupling)) throw ConfigError("bad coupling line: '" + lines[k] + "'");
    bonds.push_back(b);
  }
  try {
    return IsingInstance(n, std::move(bonds), h, topology, side, periodic);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("invalid instance file: ") + e.what());
  }
}

/// 64-bit FNV-1a of a byte string; used for instance and config fingerprints.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::uint64_t instance_hash(const IsingInstance& instance) {
  std::ostringstream os;
  write_instance(os, instance);
  return fnv1a64(os.str());
}

}  // namespace qanneal
