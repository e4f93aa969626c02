#pragma once

#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "bbmtraps/rng.hpp"

namespace bbmtraps {

struct UniformIntensity {
  double v = 1.0;  ///< traps per unit volume
};

/// Intensity l / max(|x|, x0)^{d-1}: exact tail l/|x|^{d-1}, flat core below x0.
struct RadialIntensity {
  double l = 1.0;
  double x0 = 0.0;
};

struct TrapFieldSpec {
  int d = 2;
  std::variant<UniformIntensity, RadialIntensity> kind = UniformIntensity{};
  double a = 0.5;  ///< trap ball radius

  static TrapFieldSpec uniform(int d, double v, double a);
  /// x0 defaults to a / 100 when omitted (negative).
  static TrapFieldSpec radial(int d, double l, double a, double x0 = -1.0);

  void validate() const;
  bool is_uniform() const { return std::holds_alternative<UniformIntensity>(kind); }

  /// Intensity d nu / dx at a point.
  double density(std::span<const double> x) const;
};

enum class ClearingMode {
  kPointFree,    ///< no Poisson point inside the ball
  kTrapSetFree,  ///< ball disjoint from the trap set K
};

/// nu(B(center, radius)).
double field_measure(const TrapFieldSpec& spec, std::span<const double> center, double radius);
/// nu of the origin-centred annulus r_in <= |x| < r_out by direct quadrature
/// of the radial profile.
double shell_measure(const TrapFieldSpec& spec, double r_in, double r_out);

/// exp(-nu(B(center, radius))) or exp(-nu(B(center, radius + a))).
double clearing_probability(const TrapFieldSpec& spec, std::span<const double> center, double radius,
                            ClearingMode mode);

/// Window radius covering a process of speed sqrt(2 beta m) up to `horizon`,
/// with safety factor 1.5, a diffusive margin 6 sqrt(horizon) and the trap radius.
double default_window_radius(double beta, double m, double horizon, double a);

/// Realized Poisson configuration inside B(0, window_radius). Centers are kept
/// sorted by first coordinate for slab lookups. Immutable after construction.
class TrapField {
 public:
  /// `centers` is row-major, d entries per center. Use +inf window for a
  /// hand-built field that is complete everywhere.
  TrapField(TrapFieldSpec spec, std::vector<double> centers, double window_radius);

  const TrapFieldSpec& spec() const { return spec_; }
  int dimension() const { return spec_.d; }
  double trap_radius() const { return spec_.a; }
  double window_radius() const { return window_radius_; }
  std::size_t size() const { return count_; }
  std::span<const double> center(std::size_t i) const {
    return {centers_.data() + i * static_cast<std::size_t>(spec_.d), static_cast<std::size_t>(spec_.d)};
  }

  /// Copy with one more center (window unchanged).
  TrapField with_center(std::span<const double> point) const;

  /// Calls fn(center) for every center whose first coordinate lies within
  /// `reach` of point[0]; callers do the exact distance test.
  template <class Fn>
  void for_each_near(std::span<const double> point, double reach, Fn&& fn) const {
    const double lo = point[0] - reach;
    const double hi = point[0] + reach;
    std::size_t i = lower_bound_first(lo);
    for (; i < count_; ++i) {
      auto c = center(i);
      if (c[0] > hi) break;
      fn(c);
    }
  }

  /// Throws WindowError unless B(point, reach) lies inside the window.
  void require_covered(std::span<const double> point, double reach) const;

  void write_csv(std::ostream& out) const;

 private:
  std::size_t lower_bound_first(double x) const;

  TrapFieldSpec spec_;
  std::vector<double> centers_;
  std::size_t count_ = 0;
  double window_radius_ = 0.0;
};

TrapField sample_field(const TrapFieldSpec& spec, double window_radius, RngStream& rng);

/// Appends the centers falling in the shell r_in <= |x| < r_out (row-major).
void sample_annulus(const TrapFieldSpec& spec, double r_in, double r_out, RngStream& rng,
                    std::vector<double>& centers);

/// Field revealed ring by ring on demand. Ring k covers W_{k-1} <= |x| < W_k
/// with W_k = W_0 2^k and draws from its own substream, so the centers in any
/// ball never depend on how far the field has been grown.
class GrowingTrapField {
 public:
  GrowingTrapField(TrapFieldSpec spec, RngStream rng, double initial_radius);

  /// Grows the window until it is at least `radius`.
  const TrapField& cover(double radius);
  const TrapField& current() const { return field_; }

 private:
  TrapFieldSpec spec_;
  RngStream rng_;
  int rings_ = 0;
  double radius_ = 0.0;
  std::vector<double> centers_;
  TrapField field_;
};

bool is_trap_free(const TrapField& field, std::span<const double> center, double radius, ClearingMode mode);

/// Collision assessment of one Brownian path segment of duration dt.
struct SegmentRisk {
  bool certain = false;      ///< endpoint in K, or the straight chord crosses a trap ball
  double probability = 0.0;  ///< otherwise, bridge crossing probability for the union of nearby balls
};

SegmentRisk segment_hit_risk(const TrapField& field, std::span<const double> from, std::span<const double> to,
                             double dt);

/// Hit test with the bridge correction drawn from one uniform variate.
bool segment_hits_trap(const TrapField& field, std::span<const double> from, std::span<const double> to, double dt,
                       double uniform);
bool segment_hits_trap(const TrapField& field, std::span<const double> from, std::span<const double> to, double dt,
                       RngStream& rng);

}  // namespace bbmtraps
