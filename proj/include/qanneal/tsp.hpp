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
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qanneal/error.hpp"
#include "qanneal/mc.hpp"
#include "qanneal/rng.hpp"
#include "qanneal/schedule.hpp"

#ifndef QANNEAL_DATA_DIR
#define QANNEAL_DATA_DIR "data"
#endif

namespace qanneal {

/// Two tour lengths closer than this count as equal.
inline constexpr double kLengthTolerance = 1e-9;

/// Largest instance `exhaustive_optimal` enumerates.
inline constexpr int kMaxExhaustiveCities = 12;

/// Largest instance `held_karp_length` accepts.
inline constexpr int kMaxHeldKarpCities = 20;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Symmetric distance matrix. The triangle inequality is not required.
class TspInstance {
 public:
  TspInstance() = default;

  TspInstance(int n, std::vector<double> distances, std::string label = {})
      : n_(n), d_(std::move(distances)), label_(std::move(label)) {
    if (n_ < 3) throw ContractError("a TSP instance needs at least 3 cities");
    if (d_.size() != static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_)) {
      throw ContractError("distance matrix must be N x N");
    }
    for (int i = 0; i < n_; ++i) {
      if (d_[idx(i, i)] != 0.0) throw ContractError("distance matrix needs a zero diagonal");
      for (int j = i + 1; j < n_; ++j) {
        const double a = d_[idx(i, j)];
        if (!std::isfinite(a) || a < 0.0) throw ContractError("distances must be finite and nonnegative");
        if (a != d_[idx(j, i)]) throw ContractError("distance matrix must be symmetric");
      }
    }
  }

  static TspInstance from_points(std::span<const Point> pts, std::string label = {}) {
    const int n = static_cast<int>(pts.size());
    std::vector<double> d(pts.size() * pts.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double v = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
        d[static_cast<std::size_t>(i) * n + j] = v;
        d[static_cast<std::size_t>(j) * n + i] = v;
      }
    }
    TspInstance inst(n, std::move(d), std::move(label));
    inst.points_.assign(pts.begin(), pts.end());
    return inst;
  }

  int n_cities() const noexcept { return n_; }
  const std::string& label() const noexcept { return label_; }
  double distance(int i, int j) const { return d_[idx(i, j)]; }
  std::span<const double> matrix() const noexcept { return d_; }
  /// Coordinates, when the instance was built from points.
  std::span<const Point> points() const noexcept { return points_; }

  /// Mean of d_ij over i != j.
  double mean_distance() const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j) s += distance(i, j);
    return s / (static_cast<double>(n_) * (n_ - 1));
  }

  /// Population standard deviation of d_ij (i != j) over its mean.
  double dispersion_ratio() const {
    const double mu = mean_distance();
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j) s += (distance(i, j) - mu) * (distance(i, j) - mu);
    return std::sqrt(s / (static_cast<double>(n_) * (n_ - 1))) / mu;
  }

  /// Copy with every distance multiplied so that the mean becomes `target`.
  TspInstance rescaled_to_mean(double target) const {
    if (!(target > 0.0)) throw ContractError("target mean must be positive");
    const double f = target / mean_distance();
    std::vector<double> d = d_;
    for (double& v : d) v *= f;
    TspInstance out(n_, std::move(d), label_);
    for (Point p : points_) out.points_.push_back({p.x * f, p.y * f});
    return out;
  }

  friend bool operator==(const TspInstance& a, const TspInstance& b) {
    return a.n_ == b.n_ && a.d_ == b.d_ && a.label_ == b.label_;
  }

 private:
  std::size_t idx(int i, int j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_) throw ContractError("city index out of range");
    return static_cast<std::size_t>(i) * n_ + j;
  }

  int n_ = 0;
  std::vector<double> d_;
  std::string label_;
  std::vector<Point> points_;
};

// ---------------------------------------------------------------------------
// Tours

namespace detail {

inline bool is_permutation_of_range(std::span<const int> v) {
  std::vector<char> seen(v.size(), 0);
  for (int c : v) {
    if (c < 0 || c >= static_cast<int>(v.size()) || seen[c]) return false;
    seen[c] = 1;
  }
  return true;
}

}  // namespace detail

/// City visited at each stop; stop 0 always holds city 0.
class Tour {
 public:
  Tour() = default;

  explicit Tour(std::vector<int> order) : order_(std::move(order)) {
    if (order_.size() < 3) throw ContractError("a tour needs at least 3 cities");
    if (!detail::is_permutation_of_range(order_)) throw ContractError("tour is not a permutation of the cities");
    if (order_[0] != 0) throw ContractError("tour must start at city 0");
  }

  /// Rotates an arbitrary closed route so that it starts at city 0.
  static Tour from_route(std::span<const int> route) {
    if (!detail::is_permutation_of_range(route)) throw ContractError("route is not a permutation of the cities");
    std::vector<int> v(route.begin(), route.end());
    std::rotate(v.begin(), std::find(v.begin(), v.end(), 0), v.end());
    return Tour(std::move(v));
  }

  static Tour identity(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return Tour(std::move(v));
  }

  /// Uniform over tours with stop 0 pinned.
  static Tour random(int n, Rng& rng) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    for (int i = n - 1; i > 1; --i) {
      const int j = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
      std::swap(v[i], v[j]);
    }
    return Tour(std::move(v));
  }

  int n_cities() const noexcept { return static_cast<int>(order_.size()); }
  int operator[](int stop) const { return order_[static_cast<std::size_t>(stop)]; }
  std::span<const int> order() const noexcept { return order_; }

  /// Swaps the cities at two stops other than stop 0.
  void swap_stops(int a, int b) {
    if (a <= 0 || b <= 0 || a >= n_cities() || b >= n_cities()) throw ContractError("stop 0 is pinned");
    std::swap(order_[a], order_[b]);
  }

  /// Same cycle traversed the other way.
  Tour reversed() const {
    std::vector<int> v{0};
    for (int s = n_cities() - 1; s >= 1; --s) v.push_back(order_[s]);
    return Tour(std::move(v));
  }

  friend bool operator==(const Tour&, const Tour&) = default;

 private:
  std::vector<int> order_;
};

inline double tour_length(const TspInstance& instance, std::span<const int> order) {
  const int n = instance.n_cities();
  if (static_cast<int>(order.size()) != n) throw ContractError("tour size does not match the instance");
  double s = 0.0;
  for (int a = 0; a < n; ++a) s += instance.distance(order[a], order[(a + 1) % n]);
  return s;
}

inline double tour_length(const TspInstance& instance, const Tour& tour) {
  return tour_length(instance, tour.order());
}

/// Length change from swapping the cities at stops a and b.
inline double swap_delta(const TspInstance& instance, std::span<const int> order, int a, int b) {
  const int n = static_cast<int>(order.size());
  auto after = [&](int p) { return p == a ? order[b] : p == b ? order[a] : order[p]; };
  std::array<int, 4> starts = {(a - 1 + n) % n, a, (b - 1 + n) % n, b};
  std::sort(starts.begin(), starts.end());
  double old_len = 0.0, new_len = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (k > 0 && starts[k] == starts[k - 1]) continue;
    const int s = starts[k], t = (s + 1) % n;
    old_len += instance.distance(order[s], order[t]);
    new_len += instance.distance(after(s), after(t));
  }
  return new_len - old_len;
}

// ---------------------------------------------------------------------------
// Unit-matrix encoding: n(i, a) = 1 iff city i is visited at stop a

class UnitMatrix {
 public:
  explicit UnitMatrix(int n) : n_(n), cells_(static_cast<std::size_t>(n) * n, 0) {}

  int size() const noexcept { return n_; }
  int operator()(int city, int stop) const { return cells_[index(city, stop)]; }
  void set(int city, int stop, int v) {
    if (v != 0 && v != 1) throw ContractError("units are 0 or 1");
    cells_[index(city, stop)] = static_cast<std::uint8_t>(v);
  }
  /// Ising image sigma = 2 n - 1.
  int spin(int city, int stop) const { return 2 * (*this)(city, stop) - 1; }

  friend bool operator==(const UnitMatrix&, const UnitMatrix&) = default;

 private:
  std::size_t index(int city, int stop) const {
    if (city < 0 || stop < 0 || city >= n_ || stop >= n_) throw ContractError("unit index out of range");
    return static_cast<std::size_t>(city) * n_ + stop;
  }

  int n_;
  std::vector<std::uint8_t> cells_;
};

/// route[a] is the city at stop a.
inline UnitMatrix encode_route(std::span<const int> route) {
  if (!detail::is_permutation_of_range(route)) throw ContractError("route is not a permutation of the cities");
  UnitMatrix u(static_cast<int>(route.size()));
  for (int a = 0; a < static_cast<int>(route.size()); ++a) u.set(route[a], a, 1);
  return u;
}

/// Inverse of encode_route. Rejects matrices whose rows or columns do not sum to 1.
inline std::vector<int> decode_route(const UnitMatrix& u) {
  const int n = u.size();
  std::vector<int> route(static_cast<std::size_t>(n), -1);
  for (int a = 0; a < n; ++a) {
    int count = 0;
    for (int i = 0; i < n; ++i) {
      if (u(i, a)) {
        route[a] = i;
        ++count;
      }
    }
    if (count != 1) throw ContractError("stop " + std::to_string(a) + " holds " + std::to_string(count) + " cities");
  }
  for (int i = 0; i < n; ++i) {
    int count = 0;
    for (int a = 0; a < n; ++a) count += u(i, a);
    if (count != 1) throw ContractError("city " + std::to_string(i) + " appears " + std::to_string(count) + " times");
  }
  return route;
}

inline UnitMatrix encode_tour(const Tour& tour) { return encode_route(tour.order()); }
inline Tour decode_tour(const UnitMatrix& u) { return Tour::from_route(decode_route(u)); }

/// L = 1/2 sum d_ij n_ia (n_{j,a+1} + n_{j,a-1}), stops cyclic.
inline double unit_matrix_length(const TspInstance& instance, const UnitMatrix& u) {
  const int n = instance.n_cities();
  if (u.size() != n) throw ContractError("unit matrix size does not match the instance");
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a) {
      if (!u(i, a)) continue;
      for (int j = 0; j < n; ++j) s += instance.distance(i, j) * (u(j, (a + 1) % n) + u(j, (a + n - 1) % n));
    }
  return 0.5 * s;
}

// ---------------------------------------------------------------------------
// Exact optima

struct ExhaustiveResult {
  double length = 0.0;
  std::vector<Tour> tours;  // one orientation per optimal cycle
  std::uint64_t visited = 0;
};

/// Enumerates the (N-1)!/2 distinct cycles: stop 0 pinned, orientation fixed by
/// order[1] < order[N-1].
inline ExhaustiveResult exhaustive_optimal(const TspInstance& instance) {
  const int n = instance.n_cities();
  if (n > kMaxExhaustiveCities) {
    throw SizeLimitError("exhaustive_optimal is limited to " + std::to_string(kMaxExhaustiveCities) + " cities (got " +
                         std::to_string(n) + ")");
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  ExhaustiveResult res;
  res.length = std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> best;
  do {
    if (order[1] > order[n - 1]) continue;
    ++res.visited;
    const double len = tour_length(instance, order);
    if (len < res.length - kLengthTolerance) {
      res.length = len;
      best.clear();
      best.push_back(order);
    } else if (len <= res.length + kLengthTolerance) {
      res.length = std::min(res.length, len);
      best.push_back(order);
    }
  } while (std::next_permutation(order.begin() + 1, order.end()));
  // A late, slightly shorter tour may leave earlier entries just outside the window.
  for (auto& o : best)
    if (tour_length(instance, o) <= res.length + kLengthTolerance) res.tours.emplace_back(std::move(o));
  return res;
}

/// Optimal tour length by Held-Karp dynamic programming, O(2^N N^2).
inline double held_karp_length(const TspInstance& instance) {
  const int n = instance.n_cities();
  if (n > kMaxHeldKarpCities) {
    throw SizeLimitError("held_karp_length is limited to " + std::to_string(kMaxHeldKarpCities) + " cities");
  }
  // Subsets of cities 1..n-1; dp[mask][j] = shortest path 0 -> ... -> j covering mask.
  const int m = n - 1;
  const std::size_t full = std::size_t{1} << m;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(full * m, inf);
  for (int j = 0; j < m; ++j) dp[(std::size_t{1} << j) * m + j] = instance.distance(0, j + 1);
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (int j = 0; j < m; ++j) {
      const double v = dp[mask * m + j];
      if (!(mask >> j & 1) || v == inf) continue;
      for (int k = 0; k < m; ++k) {
        if (mask >> k & 1) continue;
        const std::size_t next = mask | (std::size_t{1} << k);
        const double w = v + instance.distance(j + 1, k + 1);
        if (w < dp[next * m + k]) dp[next * m + k] = w;
      }
    }
  }
  double best = inf;
  for (int j = 0; j < m; ++j) best = std::min(best, dp[(full - 1) * m + j] + instance.distance(j + 1, 0));
  return best;
}

// ---------------------------------------------------------------------------
// Instance families

enum class TspKind { Random, SemiRandom, HCharacter, Ulysses16 };

inline std::string_view kind_name(TspKind k) {
  switch (k) {
    case TspKind::Random: return "random";
    case TspKind::SemiRandom: return "semi_random";
    case TspKind::HCharacter: return "h_character";
    case TspKind::Ulysses16: return "ulysses16";
  }
  return "?";
}

inline TspKind parse_kind(std::string_view s) {
  for (TspKind k : {TspKind::Random, TspKind::SemiRandom, TspKind::HCharacter, TspKind::Ulysses16})
    if (kind_name(k) == s) return k;
  throw ConfigError("unknown TSP instance kind '" + std::string(s) + "'");
}

/// Mean distance the TSPLIB instance is rescaled to.
inline constexpr double kUlyssesMeanDistance = 2.2;

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// TSPLIB GEO: degrees.minutes to radians, degrees truncated toward zero.
inline double tsplib_geo_radians(double x) {
  constexpr double pi = 3.141592;
  const double deg = std::trunc(x);
  const double min = x - deg;
  return pi * (deg + 5.0 * min / 3.0) / 180.0;
}

inline double tsplib_geo_distance(Point a, Point b) {
  constexpr double rrr = 6378.388;
  const double lat_a = tsplib_geo_radians(a.x), lon_a = tsplib_geo_radians(a.y);
  const double lat_b = tsplib_geo_radians(b.x), lon_b = tsplib_geo_radians(b.y);
  const double q1 = std::cos(lon_a - lon_b);
  const double q2 = std::cos(lat_a - lat_b);
  const double q3 = std::cos(lat_a + lat_b);
  return std::trunc(rrr * std::acos(0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)) + 1.0);
}

}  // namespace detail

/// Reads the TSPLIB subset TYPE: TSP with EDGE_WEIGHT_TYPE EUC_2D or GEO.
/// Distances are the integer TSPLIB distances.
inline TspInstance read_tsplib(std::istream& is, std::string label = {}) {
  std::string line, type = "TSP", weight;
  int dim = -1;
  bool coords = false;
  std::vector<Point> pts;
  std::vector<char> seen;
  while (std::getline(is, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line == "EOF") break;
    if (!coords) {
      if (line.rfind("NODE_COORD_SECTION", 0) == 0) {
        if (dim < 3) throw ConfigError("TSPLIB: DIMENSION missing or below 3");
        if (weight != "EUC_2D" && weight != "GEO") {
          throw ConfigError("TSPLIB: unsupported EDGE_WEIGHT_TYPE '" + weight + "' (EUC_2D or GEO)");
        }
        coords = true;
        pts.assign(static_cast<std::size_t>(dim), Point{});
        seen.assign(static_cast<std::size_t>(dim), 0);
        continue;
      }
      const auto colon = line.find(':');
      if (colon == std::string::npos) throw ConfigError("TSPLIB: unexpected line '" + line + "'");
      const std::string key = detail::trim(line.substr(0, colon));
      const std::string value = detail::trim(line.substr(colon + 1));
      if (key == "TYPE") {
        type = value;
        if (type != "TSP") throw ConfigError("TSPLIB: unsupported TYPE '" + type + "'");
      } else if (key == "DIMENSION") {
        dim = std::stoi(value);
      } else if (key == "EDGE_WEIGHT_TYPE") {
        weight = value;
        if (weight != "EUC_2D" && weight != "GEO") {
          throw ConfigError("TSPLIB: unsupported EDGE_WEIGHT_TYPE '" + weight + "' (EUC_2D or GEO)");
        }
      } else if (key == "NAME" && label.empty()) {
        label = value;
      }
      continue;
    }
    std::istringstream ls(line);
    int id = 0;
    Point p;
    if (!(ls >> id >> p.x >> p.y)) throw ConfigError("TSPLIB: bad coordinate line '" + line + "'");
    if (id < 1 || id > dim || seen[id - 1]) throw ConfigError("TSPLIB: bad or repeated node id " + std::to_string(id));
    pts[id - 1] = p;
    seen[id - 1] = 1;
  }
  if (!coords) throw ConfigError("TSPLIB: NODE_COORD_SECTION missing");
  if (std::count(seen.begin(), seen.end(), 1) != dim) throw ConfigError("TSPLIB: fewer coordinates than DIMENSION");
  std::vector<double> d(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      const double v = weight == "GEO" ? detail::tsplib_geo_distance(pts[i], pts[j])
                                       : std::nearbyint(std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
      d[static_cast<std::size_t>(i) * dim + j] = v;
      d[static_cast<std::size_t>(j) * dim + i] = v;
    }
  return TspInstance(dim, std::move(d), label);
}

inline TspInstance read_tsplib_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open TSPLIB file '" + path + "'");
  return read_tsplib(is);
}

inline std::string default_ulysses16_path() { return std::string(QANNEAL_DATA_DIR) + "/ulysses16.tsp"; }

/// Seeded instance of the given family. Random takes `n` cities uniform on the
/// [0, sqrt(n)]^2 square; the other families have 16 cities.
inline TspInstance generate_instance(TspKind kind, RngSeed seed, int n = 16,
                                     const std::string& tsplib_path = default_ulysses16_path()) {
  if (kind != TspKind::Random && n != 16) throw ContractError(std::string(kind_name(kind)) + " has 16 cities");
  const double side = std::sqrt(static_cast<double>(n));
  Rng rng(seed);
  std::vector<Point> pts;
  const std::string label = std::string(kind_name(kind)) + "_" + std::to_string(n) + "_" + std::to_string(seed);
  switch (kind) {
    case TspKind::Random:
      if (n < 3) throw ContractError("a TSP instance needs at least 3 cities");
      for (int i = 0; i < n; ++i) {
        const double x = side * rng.uniform();
        pts.push_back({x, side * rng.uniform()});
      }
      break;
    case TspKind::SemiRandom: {
      constexpr double sigma = 0.5;
      for (int c = 0; c < 2; ++c) {
        const double cx = 1.0 + (side - 2.0) * rng.uniform();
        const double cy = 1.0 + (side - 2.0) * rng.uniform();
        for (int i = 0; i < 6; ++i) {
          const double x = std::clamp(cx + sigma * rng.normal(), 0.0, side);
          pts.push_back({x, std::clamp(cy + sigma * rng.normal(), 0.0, side)});
        }
      }
      for (int i = 0; i < 4; ++i) {
        const double x = side * rng.uniform();
        pts.push_back({x, side * rng.uniform()});
      }
      break;
    }
    case TspKind::HCharacter: {
      const double f = side / 4.0;
      for (double x : {1.0, 3.0})
        for (int k = 0; k < 6; ++k) pts.push_back({f * x, f * 0.8 * k});
      for (double x : {1.4, 1.8, 2.2, 2.6}) pts.push_back({f * x, f * 2.0});
      return TspInstance::from_points(pts, "h_character_16");
    }
    case TspKind::Ulysses16: {
      auto raw = read_tsplib_file(tsplib_path);
      if (raw.n_cities() != 16) throw ConfigError("ulysses16 file does not have 16 cities");
      return TspInstance(16, std::vector<double>(raw.matrix().begin(), raw.matrix().end()), "ulysses16")
          .rescaled_to_mean(kUlyssesMeanDistance);
    }
  }
  return TspInstance::from_points(pts, label);
}

/// Plain-text instance: "# tsp <label>", N, then N rows of distances.
inline void write_tsp_instance(std::ostream& os, const TspInstance& inst) {
  os << "# tsp " << (inst.label().empty() ? "unnamed" : inst.label()) << '\n' << inst.n_cities() << '\n';
  os.precision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < inst.n_cities(); ++i) {
    for (int j = 0; j < inst.n_cities(); ++j) os << (j ? " " : "") << inst.distance(i, j);
    os << '\n';
  }
}

inline TspInstance read_tsp_instance(std::istream& is) {
  std::string head;
  if (!std::getline(is, head) || head.rfind("# tsp ", 0) != 0) throw ConfigError("TSP instance: missing '# tsp' header");
  int n = 0;
  if (!(is >> n) || n < 3) throw ConfigError("TSP instance: bad city count");
  std::vector<double> d(static_cast<std::size_t>(n) * n);
  for (double& v : d)
    if (!(is >> v)) throw ConfigError("TSP instance: truncated distance matrix");
  try {
    return TspInstance(n, std::move(d), head.substr(6));
  } catch (const ContractError& e) {
    throw ConfigError(std::string("TSP instance: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Annealing

struct TspOptions {
  std::optional<double> optimal_length;      // hit when |L - L*| <= kLengthTolerance
  std::vector<std::uint64_t> sample_steps;   // empty: mc_sample_steps(mc_steps)
  std::optional<Tour> initial;               // default: random tour per run or slice
  bool final_quench = false;                 // greedy descent before the last observation
  int threads = 1;
};

namespace detail {

/// All stop pairs (a, b) with 1 <= a < b <= N-1.
inline std::vector<std::pair<int, int>> stop_pairs(int n) {
  std::vector<std::pair<int, int>> p;
  for (int a = 1; a < n; ++a)
    for (int b = a + 1; b < n; ++b) p.emplace_back(a, b);
  return p;
}

inline std::vector<std::uint64_t> resolve_tsp_steps(const TspOptions& o, std::uint64_t total) {
  McOptions mo;
  mo.sample_steps = o.sample_steps;
  return resolve_steps(mo, total);
}

inline Observation observe_tours(const TspInstance& inst, std::span<const Tour> tours, std::uint64_t step, int scale,
                                 const std::optional<double>& opt) {
  Observation o;
  o.mc_step = step;
  o.rescaled_time = static_cast<double>(scale) * static_cast<double>(step);
  o.n_replicas = static_cast<int>(tours.size());
  o.best_energy = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const Tour& t : tours) {
    const double len = tour_length(inst, t);
    sum += len;
    o.best_energy = std::min(o.best_energy, len);
    if (opt && std::abs(len - *opt) <= kLengthTolerance) ++o.ground_hits;
  }
  o.avg_energy = sum / static_cast<double>(tours.size());
  return o;
}

}  // namespace detail

/// Applies strictly shortening stop swaps until none is left.
inline Tour quench_tour(const TspInstance& instance, Tour tour) {
  const auto pairs = detail::stop_pairs(instance.n_cities());
  for (bool improved = true; improved;) {
    improved = false;
    for (auto [a, b] : pairs) {
      if (swap_delta(instance, tour.order(), a, b) < -kLengthTolerance) {
        tour.swap_stops(a, b);
        improved = true;
      }
    }
  }
  return tour;
}

/// Independent SA runs over tours. One MC step is (N-1)(N-2)/2 random stop-pair
/// exchange trials with heat-bath acceptance at T = schedule(step). Run r draws
/// its start from derive_seed(seed, r, 1) and its moves from derive_seed(seed, r, 0).
inline std::vector<RunRecord> sa_tsp(const TspInstance& instance, const Schedule& temperature,
                                     std::uint64_t mc_steps, int n_runs, RngSeed seed, const TspOptions& opts = {}) {
  if (mc_steps < 1) throw ContractError("mc_steps must be at least 1");
  if (n_runs < 1) throw ContractError("n_runs must be at least 1");
  if (opts.initial && opts.initial->n_cities() != instance.n_cities()) throw ContractError("initial tour size mismatch");
  const auto steps = detail::resolve_tsp_steps(opts, mc_steps);
  const auto pairs = detail::stop_pairs(instance.n_cities());
  std::vector<RunRecord> out(static_cast<std::size_t>(n_runs));
  detail::parallel_runs(n_runs, opts.threads, [&](int r) {
    Rng init(derive_seed(seed, static_cast<std::uint64_t>(r), 1));
    Tour tour = opts.initial ? *opts.initial : Tour::random(instance.n_cities(), init);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r), 0));
    RunRecord rec;
    rec.seed = derive_seed(seed, static_cast<std::uint64_t>(r), 0);
    std::size_t next = 0;
    auto observe = [&](std::uint64_t s) {
      while (next < steps.size() && steps[next] == s) {
        if (s == mc_steps && opts.final_quench) tour = quench_tour(instance, std::move(tour));
        rec.observations.push_back(detail::observe_tours(instance, std::span(&tour, 1), s, 1, opts.optimal_length));
        ++next;
      }
    };
    observe(0);
    for (std::uint64_t s = 1; s <= mc_steps; ++s) {
      const double t = temperature(static_cast<double>(s));
      for (std::size_t trial = 0; trial < pairs.size(); ++trial) {
        const auto [a, b] = pairs[rng.below(pairs.size())];
        const double dl = swap_delta(instance, tour.order(), a, b);
        if (rng.uniform() < heat_bath_probability(dl / t)) tour.swap_stops(a, b);
      }
      observe(s);
    }
    out[static_cast<std::size_t>(r)] = std::move(rec);
  });
  return out;
}

/// Change in sum_u sigma_u(k) sigma_u(k') when slice k swaps the cities x, y at
/// stops a, b and k' is a neighbouring slice.
inline int swap_alignment_delta(const Tour& neighbor, int x, int y, int a, int b) {
  auto s = [&](int city, int stop) { return neighbor[stop] == city ? 1 : -1; };
  // Units (x,a), (y,b) go 1 -> 0 and (x,b), (y,a) go 0 -> 1.
  return -2 * (s(x, a) + s(y, b) - s(x, b) - s(y, a));
}

/// Trotter-slice QA over tours. Each slice is a tour; slices k and k+1 (periodic)
/// are coupled through the unit spins with strength gamma_M = beta_eff Gamma_M.
/// A trial swaps two stops in one slice (four unit flips) and is accepted with
/// heat-bath probability of dS = beta_eff dL - gamma_M d(alignment). One MC step
/// sweeps the slices in order with (N-1)(N-2)/2 random pair trials each.
inline RunRecord qa_tsp(const TspInstance& instance, const Schedule& gamma, double beta_eff, int m,
                        std::uint64_t mc_steps, RngSeed seed, const TspOptions& opts = {}, int run = 0) {
  if (m < 2) throw ContractError("qa_tsp needs at least 2 Trotter slices");
  if (mc_steps < 1) throw ContractError("mc_steps must be at least 1");
  if (!(beta_eff > 0.0)) throw ContractError("beta_eff must be positive");
  if (opts.initial && opts.initial->n_cities() != instance.n_cities()) throw ContractError("initial tour size mismatch");
  const int n = instance.n_cities();
  const auto steps = detail::resolve_tsp_steps(opts, mc_steps);
  const auto pairs = detail::stop_pairs(n);
  const auto ur = static_cast<std::uint64_t>(run);
  std::vector<Tour> slices;
  for (int k = 0; k < m; ++k) {
    Rng init(derive_seed(seed, ur, static_cast<std::uint64_t>(k) + 1));
    slices.push_back(opts.initial ? *opts.initial : Tour::random(n, init));
  }
  Rng rng(derive_seed(seed, ur, 0));
  RunRecord rec;
  rec.seed = derive_seed(seed, ur, 0);
  rec.time_scale = m;
  std::size_t next = 0;
  auto observe = [&](std::uint64_t s) {
    while (next < steps.size() && steps[next] == s) {
      if (s == mc_steps && opts.final_quench)
        for (Tour& t : slices) t = quench_tour(instance, std::move(t));
      rec.observations.push_back(detail::observe_tours(instance, slices, s, m, opts.optimal_length));
      ++next;
    }
  };
  observe(0);
  for (std::uint64_t s = 1; s <= mc_steps; ++s) {
    const double g = gamma(static_cast<double>(s));
    const double gamma_m = beta_eff * trotter_coupling(g, beta_eff, m);
    for (int k = 0; k < m; ++k) {
      Tour& cur = slices[static_cast<std::size_t>(k)];
      const Tour& up = slices[static_cast<std::size_t>((k + 1) % m)];
      const Tour& dn = slices[static_cast<std::size_t>((k + m - 1) % m)];
      for (std::size_t trial = 0; trial < pairs.size(); ++trial) {
        const auto [a, b] = pairs[rng.below(pairs.size())];
        const int x = cur[a], y = cur[b];
        const double dl = swap_delta(instance, cur.order(), a, b);
        const int dalign = swap_alignment_delta(up, x, y, a, b) + swap_alignment_delta(dn, x, y, a, b);
        const double ds = beta_eff * dl - gamma_m * dalign;
        if (rng.uniform() < heat_bath_probability(ds)) cur.swap_stops(a, b);
      }
    }
    observe(s);
  }
  return rec;
}

/// `n_runs` independent QA runs (run index r feeds derive_seed).
inline std::vector<RunRecord> qa_tsp_ensemble(const TspInstance& instance, const Schedule& gamma, double beta_eff,
                                              int m, std::uint64_t mc_steps, int n_runs, RngSeed seed,
                                              const TspOptions& opts = {}) {
  if (n_runs < 1) throw ContractError("n_runs must be at least 1");
  std::vector<RunRecord> out(static_cast<std::size_t>(n_runs));
  TspOptions inner = opts;
  inner.threads = 1;
  detail::parallel_runs(n_runs, opts.threads,
                        [&](int r) { out[static_cast<std::size_t>(r)] = qa_tsp(instance, gamma, beta_eff, m, mc_steps, seed, inner, r); });
  return out;
}

}  // namespace qanneal
