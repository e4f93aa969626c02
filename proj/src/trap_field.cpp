#include "bbmtraps/trap_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "bbmtraps/errors.hpp"
#include "bbmtraps/geometry.hpp"

namespace bbmtraps {

namespace {

constexpr double kMeasureTolerance = 1e-12;

double radial_core_mass(const RadialIntensity& r, int d, double radius) {
  // Flat density l / x0^{d-1} on B(0, min(radius, x0)).
  double inner = std::min(radius, r.x0);
  return r.l * unit_ball_volume(d) * std::pow(inner, d) / std::pow(r.x0, d - 1);
}

double radial_shell_mass(const RadialIntensity& r, int d, double radius) {
  return r.l * unit_sphere_area(d) * std::max(0.0, radius - r.x0);
}

void unit_direction(int d, RngStream& rng, std::span<double> out) {
  if (d == 1) {
    out[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return;
  }
  double n = 0.0;
  do {
    for (auto& x : out) x = rng.normal();
    n = norm(out);
  } while (n == 0.0);
  for (auto& x : out) x /= n;
}

double point_segment_distance(std::span<const double> p, std::span<const double> a, std::span<const double> b) {
  double ab2 = 0.0;
  double ap_ab = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double ab = b[i] - a[i];
    ab2 += ab * ab;
    ap_ab += (p[i] - a[i]) * ab;
  }
  double s = ab2 > 0.0 ? std::clamp(ap_ab / ab2, 0.0, 1.0) : 0.0;
  double d2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double proj = a[i] + s * (b[i] - a[i]);
    d2 += (p[i] - proj) * (p[i] - proj);
  }
  return std::sqrt(d2);
}

}  // namespace

TrapFieldSpec TrapFieldSpec::uniform(int d, double v, double a) {
  TrapFieldSpec s;
  s.d = d;
  s.kind = UniformIntensity{v};
  s.a = a;
  s.validate();
  return s;
}

TrapFieldSpec TrapFieldSpec::radial(int d, double l, double a, double x0) {
  TrapFieldSpec s;
  s.d = d;
  s.kind = RadialIntensity{l, x0 < 0.0 ? a / 100.0 : x0};
  s.a = a;
  s.validate();
  return s;
}

void TrapFieldSpec::validate() const {
  if (d < 1) throw InvalidArgument("trap field dimension must be positive");
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("trap radius a must be positive");
  if (auto* u = std::get_if<UniformIntensity>(&kind)) {
    // v = 0 is allowed: the empty field.
    if (!(u->v >= 0.0) || !std::isfinite(u->v)) throw InvalidArgument("uniform intensity v must be >= 0");
  } else {
    const auto& r = std::get<RadialIntensity>(kind);
    if (!(r.l > 0.0) || !std::isfinite(r.l)) throw InvalidArgument("radial intensity l must be positive");
    if (!(r.x0 > 0.0) || !std::isfinite(r.x0)) throw InvalidArgument("radial cutoff x0 must be positive");
  }
}

double TrapFieldSpec::density(std::span<const double> x) const {
  if (auto* u = std::get_if<UniformIntensity>(&kind)) return u->v;
  const auto& r = std::get<RadialIntensity>(kind);
  return r.l / std::pow(std::max(norm(x), r.x0), d - 1);
}

double field_measure(const TrapFieldSpec& spec, std::span<const double> center, double radius) {
  if (radius < 0.0) throw DomainError("field_measure: negative radius");
  if (radius == 0.0) return 0.0;
  const int d = spec.d;
  if (auto* u = std::get_if<UniformIntensity>(&spec.kind)) return u->v * unit_ball_volume(d) * std::pow(radius, d);

  const auto& r = std::get<RadialIntensity>(spec.kind);
  const double b = norm(center);
  if (d == 1) return 2.0 * r.l * radius;  // the radial profile is flat in one dimension
  if (b == 0.0) return radial_core_mass(r, d, radius) + radial_shell_mass(r, d, radius);

  auto weight = [&](double rho) { return r.l * std::pow(rho / std::max(rho, r.x0), d - 1); };
  const double breaks[] = {r.x0};
  const double scale = r.l * std::pow(radius, d) + 1.0;
  return radial_ball_integral(d, b, radius, weight, breaks, kMeasureTolerance * scale);
}

double shell_measure(const TrapFieldSpec& spec, double r_in, double r_out) {
  if (r_in < 0.0 || r_out < r_in) throw DomainError("shell_measure: need 0 <= r_in <= r_out");
  if (r_out == r_in) return 0.0;
  const int d = spec.d;
  const double sd = unit_sphere_area(d);
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  auto integrand = [&](double rho) {
    std::vector<double> x(static_cast<std::size_t>(d), 0.0);
    x[0] = rho;
    return spec.density(x) * sd * std::pow(rho, d - 1);
  };
  std::vector<double> cuts{r_in, r_out};
  if (auto* r = std::get_if<RadialIntensity>(&spec.kind))
    if (r->x0 > r_in && r->x0 < r_out) cuts.insert(cuts.begin() + 1, r->x0);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += integrator.integrate(integrand, cuts[i], cuts[i + 1], 1e-14);
  return total;
}

double clearing_probability(const TrapFieldSpec& spec, std::span<const double> center, double radius,
                            ClearingMode mode) {
  if (radius < 0.0) throw DomainError("clearing_probability: negative radius");
  if (mode == ClearingMode::kPointFree && radius == 0.0) return 1.0;
  double reach = mode == ClearingMode::kTrapSetFree ? radius + spec.a : radius;
  return std::exp(-field_measure(spec, center, reach));
}

double default_window_radius(double beta, double m, double horizon, double a) {
  const double speed = std::sqrt(2.0 * beta * std::max(m, 0.0));
  return 1.5 * speed * horizon + 6.0 * std::sqrt(horizon) + a;
}

TrapField::TrapField(TrapFieldSpec spec, std::vector<double> centers, double window_radius)
    : spec_(std::move(spec)), window_radius_(window_radius) {
  spec_.validate();
  if (!(window_radius > 0.0)) throw InvalidArgument("trap field window radius must be positive");
  const auto d = static_cast<std::size_t>(spec_.d);
  if (centers.size() % d != 0) throw InvalidArgument("center coordinates are not a multiple of the dimension");
  count_ = centers.size() / d;
  for (std::size_t i = 0; i < count_; ++i) {
    std::span<const double> c(centers.data() + i * d, d);
    if (norm(c) > window_radius_ * (1.0 + 1e-12)) throw InvalidArgument("trap center lies outside the window");
  }
  std::vector<std::size_t> order(count_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return centers[x * d] < centers[y * d]; });
  centers_.reserve(centers.size());
  for (auto i : order) centers_.insert(centers_.end(), centers.begin() + static_cast<long>(i * d),
                                       centers.begin() + static_cast<long>((i + 1) * d));
}

TrapField TrapField::with_center(std::span<const double> point) const {
  std::vector<double> c = centers_;
  c.insert(c.end(), point.begin(), point.end());
  return TrapField(spec_, std::move(c), window_radius_);
}

std::size_t TrapField::lower_bound_first(double x) const {
  std::size_t lo = 0;
  std::size_t hi = count_;
  const auto d = static_cast<std::size_t>(spec_.d);
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (centers_[mid * d] < x)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

void TrapField::require_covered(std::span<const double> point, double reach) const {
  if (norm(point) + reach > window_radius_) {
    std::ostringstream msg;
    msg << "query at distance " << norm(point) << " with reach " << reach << " leaves the sampled window of radius "
        << window_radius_;
    throw WindowError(msg.str());
  }
}

void TrapField::write_csv(std::ostream& out) const {
  for (int k = 0; k < spec_.d; ++k) out << (k ? "," : "") << 'x' << k;
  out << '\n';
  auto old = out.precision(17);
  for (std::size_t i = 0; i < count_; ++i) {
    auto c = center(i);
    for (std::size_t k = 0; k < c.size(); ++k) out << (k ? "," : "") << c[k];
    out << '\n';
  }
  out.precision(old);
}

void sample_annulus(const TrapFieldSpec& spec, double r_in, double r_out, RngStream& rng,
                    std::vector<double>& centers) {
  if (!(r_in >= 0.0 && r_out >= r_in) || !std::isfinite(r_out))
    throw InvalidArgument("sample_annulus: need 0 <= r_in <= r_out < inf");
  const int d = spec.d;
  const std::vector<double> origin(static_cast<std::size_t>(d), 0.0);
  auto ball_power = [d](double x) { return std::pow(x, d); };

  // Mass split between the flat core |x| < x0 and the rest.
  double core = 0.0;
  double core_lo = 0.0, core_hi = 0.0, shell_lo = r_in, shell_hi = r_out;
  double mass = 0.0;
  if (auto* u = std::get_if<UniformIntensity>(&spec.kind)) {
    mass = u->v * unit_ball_volume(d) * (ball_power(r_out) - ball_power(r_in));
  } else {
    const auto& r = std::get<RadialIntensity>(spec.kind);
    const double core_mass = radial_core_mass(r, d, r_out) - radial_core_mass(r, d, r_in);
    const double shell_mass = radial_shell_mass(r, d, r_out) - radial_shell_mass(r, d, r_in);
    mass = core_mass + shell_mass;
    if (mass > 0.0) core = core_mass / mass;
    core_lo = std::min(r_in, r.x0);
    core_hi = std::min(r_out, r.x0);
    shell_lo = std::max(r_in, r.x0);
    shell_hi = std::max(r_out, r.x0);
  }
  if (!(mass > 0.0)) return;
  const long n = std::poisson_distribution<long>(mass)(rng);

  const std::size_t start = centers.size();
  centers.resize(start + static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
  for (long i = 0; i < n; ++i) {
    std::span<double> c(centers.data() + start + static_cast<std::size_t>(i * d), static_cast<std::size_t>(d));
    double rho = 0.0;
    if (spec.is_uniform()) {
      rho = std::pow(ball_power(r_in) + rng.uniform() * (ball_power(r_out) - ball_power(r_in)), 1.0 / d);
    } else if (rng.uniform() < core) {
      rho = std::pow(ball_power(core_lo) + rng.uniform() * (ball_power(core_hi) - ball_power(core_lo)), 1.0 / d);
    } else {
      rho = shell_lo + rng.uniform() * (shell_hi - shell_lo);
    }
    unit_direction(d, rng, c);
    for (auto& x : c) x *= std::min(rho, r_out);
  }
}

TrapField sample_field(const TrapFieldSpec& spec, double window_radius, RngStream& rng) {
  spec.validate();
  if (!(window_radius > 0.0) || !std::isfinite(window_radius))
    throw InvalidArgument("sample_field: window radius must be positive and finite");
  std::vector<double> centers;
  sample_annulus(spec, 0.0, window_radius, rng, centers);
  return TrapField(spec, std::move(centers), window_radius);
}

GrowingTrapField::GrowingTrapField(TrapFieldSpec spec, RngStream rng, double initial_radius)
    : spec_(std::move(spec)), rng_(rng), field_(spec_, {}, initial_radius) {
  if (!(initial_radius > 0.0) || !std::isfinite(initial_radius))
    throw InvalidArgument("GrowingTrapField: initial radius must be positive and finite");
  RngStream ring = rng_.substream(0);
  sample_annulus(spec_, 0.0, initial_radius, ring, centers_);
  radius_ = initial_radius;
  field_ = TrapField(spec_, centers_, radius_);
}

const TrapField& GrowingTrapField::cover(double radius) {
  if (radius <= radius_) return field_;
  if (!std::isfinite(radius)) throw WindowError("GrowingTrapField: cannot cover an infinite radius");
  while (radius_ < radius) {
    ++rings_;
    RngStream ring = rng_.substream(static_cast<std::uint64_t>(rings_));
    sample_annulus(spec_, radius_, 2.0 * radius_, ring, centers_);
    radius_ *= 2.0;
  }
  field_ = TrapField(spec_, centers_, radius_);
  return field_;
}

bool is_trap_free(const TrapField& field, std::span<const double> center, double radius, ClearingMode mode) {
  if (radius < 0.0) throw DomainError("is_trap_free: negative radius");
  const double reach = mode == ClearingMode::kTrapSetFree ? radius + field.trap_radius() : radius;
  field.require_covered(center, reach);
  bool free = true;
  field.for_each_near(center, reach, [&](std::span<const double> c) {
    if (free && distance(c, center) <= reach) free = false;
  });
  return free;
}

SegmentRisk segment_hit_risk(const TrapField& field, std::span<const double> from, std::span<const double> to,
                             double dt) {
  if (!(dt > 0.0)) throw DomainError("segment_hit_risk: dt must be positive");
  const double a = field.trap_radius();
  field.require_covered(from, a);
  field.require_covered(to, a);

  const double mid_first[1] = {0.5 * (from[0] + to[0])};
  auto midpoint_distance = [&](std::span<const double> c) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      double diff = c[i] - 0.5 * (from[i] + to[i]);
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  const double reach = distance(from, to) + a + 6.0 * std::sqrt(dt);

  SegmentRisk risk;
  double miss = 1.0;
  field.for_each_near(mid_first, reach, [&](std::span<const double> c) {
    if (risk.certain || midpoint_distance(c) > reach) return;
    const double d1 = distance(from, c) - a;
    const double d2 = distance(to, c) - a;
    if (d1 <= 0.0 || d2 <= 0.0 || point_segment_distance(c, from, to) <= a) {
      risk.certain = true;
      return;
    }
    miss *= 1.0 - std::exp(-2.0 * d1 * d2 / dt);
  });
  risk.probability = risk.certain ? 1.0 : 1.0 - miss;
  return risk;
}

bool segment_hits_trap(const TrapField& field, std::span<const double> from, std::span<const double> to, double dt,
                       double uniform) {
  SegmentRisk risk = segment_hit_risk(field, from, to, dt);
  return risk.certain || uniform < risk.probability;
}

bool segment_hits_trap(const TrapField& field, std::span<const double> from, std::span<const double> to, double dt,
                       RngStream& rng) {
  return segment_hits_trap(field, from, to, dt, rng.uniform());
}

}  // namespace bbmtraps
