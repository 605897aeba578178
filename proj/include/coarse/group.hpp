#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace coarse {

enum class Family { kIntegerLattice, kFreeGroup, kHeisenberg3 };

/// A finitely generated group with its standard symmetric generating set.
///
///  - IntegerLattice(d): Z^d with generators +-e_i. Normal form: the d
///    coordinates.
///  - FreeGroup(k): free group on k letters with generators a_i^{+-1}.
///    Normal form: the reduced word, letters encoded as +-(i+1).
///  - Heisenberg3: integer Heisenberg group, (a,b,c)(a',b',c') =
///    (a+a', b+b', c+c'+ab'), generators x=(1,0,0), y=(0,1,0) and inverses.
struct GroupSpec {
  Family family = Family::kIntegerLattice;
  int rank = 1;  // d for the lattice, k for the free group, unused otherwise

  static GroupSpec lattice(int d);
  static GroupSpec free(int k);
  static GroupSpec heisenberg();

  /// Throws InvalidSpec for d = 0 or k = 0.
  void validate() const;
  std::string name() const;
};

using Element = std::vector<int>;

Element identity(const GroupSpec& spec);
Element multiply(const GroupSpec& spec, const Element& g, const Element& h);
Element inverse(const GroupSpec& spec, const Element& g);
/// Symmetric generating set, in a fixed order.
std::vector<Element> generators(const GroupSpec& spec);
std::string format_element(const GroupSpec& spec, const Element& g);

/// Closed-form size of the radius-r ball when one is known; -1 otherwise.
long long predicted_ball_size(const GroupSpec& spec, int radius);

/// Points of a radius-R Cayley ball together with exact word distances.
struct GroupBall {
  GroupSpec spec;
  int radius = 0;
  std::vector<Element> points;
  std::vector<int> word_length;
  Eigen::MatrixXi dist;
  std::size_t identity_index = 0;

  std::size_t size() const { return points.size(); }
  int diameter() const;
  /// Index of a group element in the ball, or -1.
  long index_of(const Element& g) const;
};

using BallPtr = std::shared_ptr<const GroupBall>;

struct BallOptions {
  std::size_t point_cap = 5000;
  /// Cap on the auxiliary radius-2R ball used for distances.
  std::size_t distance_ball_cap = 4'000'000;
};

/// Enumerates the ball by breadth-first search from the identity. Points are
/// ordered by word length, then lexicographically by normal form. Distances
/// are looked up in the radius-2R ball, so they are exact.
BallPtr build_ball(const GroupSpec& spec, int radius,
                   const BallOptions& options = {});

/// Tube of width r: pairs (x, y) with d(x, y) <= r.
struct Tube {
  int r = 0;
};

bool in_tube(const GroupBall& ball, Tube tube, std::size_t i, std::size_t j);

/// CSV with columns index,normal_form,word_length.
std::string ball_to_csv(const GroupBall& ball);

/// Stable digest of the ball (spec, radius, points) for kernel sidecars.
std::string ball_hash(const GroupBall& ball);

}  // namespace coarse
