#include "coarse/group.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "coarse/errors.hpp"

namespace coarse {

namespace {

struct ElementHash {
  std::size_t operator()(const Element& g) const {
    std::uint64_t h = 1469598103934665603ull;
    for (int v : g) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

using LengthTable = std::unordered_map<Element, int, ElementHash>;

long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Level-by-level BFS. Each level is sorted lexicographically before the next
// one is expanded, which fixes the point order.
std::vector<std::vector<Element>> bfs_levels(const GroupSpec& spec, int radius,
                                             std::size_t cap,
                                             LengthTable& lengths) {
  const auto gens = generators(spec);
  std::vector<std::vector<Element>> levels;
  Element e = identity(spec);
  lengths.emplace(e, 0);
  levels.push_back({e});
  std::size_t total = 1;
  for (int level = 1; level <= radius; ++level) {
    std::vector<Element> next;
    for (const auto& g : levels.back()) {
      for (const auto& s : gens) {
        Element h = multiply(spec, g, s);
        if (lengths.emplace(h, level).second) next.push_back(std::move(h));
      }
    }
    std::sort(next.begin(), next.end());
    total += next.size();
    if (total > cap) {
      throw CapExceeded("ball of radius " + std::to_string(radius) + " for " +
                        spec.name() + " exceeds the cap of " +
                        std::to_string(cap) + " points");
    }
    levels.push_back(std::move(next));
  }
  return levels;
}

}  // namespace

GroupSpec GroupSpec::lattice(int d) { return {Family::kIntegerLattice, d}; }
GroupSpec GroupSpec::free(int k) { return {Family::kFreeGroup, k}; }
GroupSpec GroupSpec::heisenberg() { return {Family::kHeisenberg3, 0}; }

void GroupSpec::validate() const {
  switch (family) {
    case Family::kIntegerLattice:
      if (rank < 1) throw InvalidSpec("lattice dimension d must be >= 1");
      break;
    case Family::kFreeGroup:
      if (rank < 1) throw InvalidSpec("free group rank k must be >= 1");
      break;
    case Family::kHeisenberg3:
      break;
  }
}

std::string GroupSpec::name() const {
  switch (family) {
    case Family::kIntegerLattice:
      return "Z^" + std::to_string(rank);
    case Family::kFreeGroup:
      return "F_" + std::to_string(rank);
    case Family::kHeisenberg3:
      return "H3(Z)";
  }
  return "?";
}

Element identity(const GroupSpec& spec) {
  switch (spec.family) {
    case Family::kIntegerLattice:
      return Element(spec.rank, 0);
    case Family::kFreeGroup:
      return {};
    case Family::kHeisenberg3:
      return {0, 0, 0};
  }
  return {};
}

Element multiply(const GroupSpec& spec, const Element& g, const Element& h) {
  switch (spec.family) {
    case Family::kIntegerLattice: {
      Element r(g);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] += h[i];
      return r;
    }
    case Family::kFreeGroup: {
      Element r(g);
      for (int letter : h) {
        if (!r.empty() && r.back() == -letter) {
          r.pop_back();
        } else {
          r.push_back(letter);
        }
      }
      return r;
    }
    case Family::kHeisenberg3:
      return {g[0] + h[0], g[1] + h[1], g[2] + h[2] + g[0] * h[1]};
  }
  return {};
}

Element inverse(const GroupSpec& spec, const Element& g) {
  switch (spec.family) {
    case Family::kIntegerLattice: {
      Element r(g);
      for (int& v : r) v = -v;
      return r;
    }
    case Family::kFreeGroup: {
      Element r(g.rbegin(), g.rend());
      for (int& v : r) v = -v;
      return r;
    }
    case Family::kHeisenberg3:
      // (a,b,c)^{-1} = (-a,-b,-c+ab)
      return {-g[0], -g[1], -g[2] + g[0] * g[1]};
  }
  return {};
}

std::vector<Element> generators(const GroupSpec& spec) {
  std::vector<Element> gens;
  switch (spec.family) {
    case Family::kIntegerLattice:
      for (int i = 0; i < spec.rank; ++i) {
        for (int s : {1, -1}) {
          Element g(spec.rank, 0);
          g[i] = s;
          gens.push_back(g);
        }
      }
      break;
    case Family::kFreeGroup:
      for (int i = 1; i <= spec.rank; ++i) {
        gens.push_back({i});
        gens.push_back({-i});
      }
      break;
    case Family::kHeisenberg3:
      gens = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
      break;
  }
  return gens;
}

std::string format_element(const GroupSpec& spec, const Element& g) {
  std::ostringstream os;
  if (spec.family == Family::kFreeGroup) {
    if (g.empty()) return "e";
    for (int letter : g) {
      int idx = std::abs(letter) - 1;
      char c = static_cast<char>((letter > 0 ? 'a' : 'A') + idx % 26);
      os << c;
      if (idx >= 26) os << idx / 26;
    }
    return os.str();
  }
  os << '(';
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i) os << ' ';
    os << g[i];
  }
  os << ')';
  return os.str();
}

long long predicted_ball_size(const GroupSpec& spec, int radius) {
  switch (spec.family) {
    case Family::kIntegerLattice: {
      long long n = 0;
      for (int k = 0; k <= std::min(spec.rank, radius); ++k) {
        n += (1ll << k) * binomial(spec.rank, k) * binomial(radius, k);
      }
      return n;
    }
    case Family::kFreeGroup: {
      if (spec.rank == 1) return 2ll * radius + 1;
      const long long q = 2ll * spec.rank - 1;
      long long pw = 1;
      for (int i = 0; i < radius; ++i) {
        if (pw > (1ll << 50) / q) return -1;
        pw *= q;
      }
      return 1 + 2ll * spec.rank * (pw - 1) / (q - 1);
    }
    case Family::kHeisenberg3:
      return -1;
  }
  return -1;
}

int GroupBall::diameter() const { return size() ? dist.maxCoeff() : 0; }

long GroupBall::index_of(const Element& g) const {
  auto it = std::find(points.begin(), points.end(), g);
  return it == points.end() ? -1 : static_cast<long>(it - points.begin());
}

BallPtr build_ball(const GroupSpec& spec, int radius,
                   const BallOptions& options) {
  spec.validate();
  if (radius < 0) throw InvalidSpec("radius must be non-negative");
  const long long predicted = predicted_ball_size(spec, radius);
  if (predicted > static_cast<long long>(options.point_cap)) {
    throw CapExceeded("ball of radius " + std::to_string(radius) + " for " +
                      spec.name() + " has " + std::to_string(predicted) +
                      " points, cap is " + std::to_string(options.point_cap));
  }
  const long long predicted2 = predicted_ball_size(spec, 2 * radius);
  if (predicted2 > static_cast<long long>(options.distance_ball_cap)) {
    throw CapExceeded("distance ball of radius " +
                      std::to_string(2 * radius) + " exceeds the cap");
  }

  LengthTable small;
  auto levels = bfs_levels(spec, radius, options.point_cap, small);
  LengthTable lengths;
  bfs_levels(spec, 2 * radius, options.distance_ball_cap, lengths);

  auto ball = std::make_shared<GroupBall>();
  ball->spec = spec;
  ball->radius = radius;
  for (int level = 0; level <= radius; ++level) {
    for (auto& g : levels[level]) {
      ball->points.push_back(std::move(g));
      ball->word_length.push_back(level);
    }
  }
  ball->identity_index = 0;

  const auto m = static_cast<Eigen::Index>(ball->points.size());
  ball->dist = Eigen::MatrixXi::Zero(m, m);
  std::vector<Element> inverses;
  inverses.reserve(m);
  for (const auto& g : ball->points) inverses.push_back(inverse(spec, g));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const auto it = lengths.find(multiply(spec, inverses[i], ball->points[j]));
      if (it == lengths.end()) {
        throw Error("internal: distance lookup left the radius-2R ball");
      }
      ball->dist(i, j) = ball->dist(j, i) = it->second;
    }
  }
  return ball;
}

bool in_tube(const GroupBall& ball, Tube tube, std::size_t i, std::size_t j) {
  if (i >= ball.size() || j >= ball.size()) {
    throw InvalidArgument("point index out of range");
  }
  return ball.dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <=
         tube.r;
}

std::string ball_to_csv(const GroupBall& ball) {
  std::ostringstream os;
  os << "index,normal_form,word_length\n";
  for (std::size_t i = 0; i < ball.size(); ++i) {
    os << i << ',' << format_element(ball.spec, ball.points[i]) << ','
       << ball.word_length[i] << '\n';
  }
  return os.str();
}

std::string ball_hash(const GroupBall& ball) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  mix(static_cast<std::uint64_t>(ball.spec.family));
  mix(static_cast<std::uint64_t>(ball.spec.rank));
  mix(static_cast<std::uint64_t>(ball.radius));
  for (const auto& g : ball.points) {
    mix(g.size());
    for (int v : g) mix(static_cast<std::uint32_t>(v));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace coarse
