#pragma once

#include "shaplm/geometry.hpp"
#include "shaplm/metrics.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace shaplm {

/// Deterministic stream splitting: a well-mixed 64-bit seed for (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Zero-mean GP with covariance variance * exp(-||s1 - s2|| / range).
struct GpSpec {
  double range = 1.0;
  double variance = 1.0;
  double jitter = 1e-10;

  void validate() const;
};

/// Dense covariance matrix of the exponential kernel (no jitter).
Eigen::MatrixXd exponential_covariance(std::span<const Point2> locations, const GpSpec& spec);

/// One draw L z with L L' = C + jitter I. The jitter escalates tenfold up to
/// 1e-6 if the factorization fails. Limited to 5000 locations.
Eigen::VectorXd sample_gp(std::span<const Point2> locations, const GpSpec& spec, std::uint64_t seed);

/// x1 = z1, x2 = c z1 + sqrt(1 - c^2) z2, with z1, z2 independent unit GPs of range r_prime.
Eigen::MatrixXd gen_covariates(std::span<const Point2> locations, double c, double r_prime,
                               std::uint64_t seed);

/// Piecewise-constant surface: the first region containing a point decides
/// its cluster label (the region index) and value.
struct Region {
  enum class Kind { Rect, Disk };
  Kind kind = Kind::Rect;
  Eigen::Vector2d lo{0, 0}, hi{1, 1};  // Rect, closed
  Eigen::Vector2d center{0.5, 0.5};    // Disk, closed
  double radius = 0.25;
  double value = 0.0;

  bool contains(const Point2& p) const;
};

struct PiecewiseSurface {
  std::vector<Region> regions;

  /// Region index of p; throws when no region contains it.
  int label(const Point2& p) const;
  double value(const Point2& p) const { return regions[label(p)].value; }
};

/// Quadrants of `domain` split at its midpoint: lower-left, lower-right,
/// upper-left, upper-right.
PiecewiseSurface quadrant_surface(const Rect& domain, std::array<double, 4> values);
/// Default clustered coefficients: quadrants (-2, -1, 1, 2) for beta1, and for
/// beta2 a central disk of radius 0.25 (value 2) over quadrants (-2, -1, 0, 1).
PiecewiseSurface default_beta1(const Rect& domain);
PiecewiseSurface default_beta2(const Rect& domain);

struct InterceptSpec {
  enum class Kind { Gp, Zero, Piecewise, Function };
  Kind kind = Kind::Gp;
  GpSpec gp{10.0, 1.0, 1e-10};
  PiecewiseSurface surface;                     // Piecewise only
  std::function<double(const Point2&)> function;  // Function only
};

struct ScenarioSpec {
  int n = 1000;
  Rect domain{};
  double sigma2 = 0.1;
  std::vector<PiecewiseSurface> beta_surfaces;  // one per covariate
  double collinearity = 0.75;                   // c
  double covariate_range = 0.1;                 // r'
  InterceptSpec intercept{};

  /// Two covariates with the default surfaces, intercept GP of the given range.
  static ScenarioSpec defaults(double intercept_range = 10.0);
  void validate() const;
};

struct SyntheticDataset {
  std::vector<Point2> locations;
  Eigen::MatrixXd X;          // n x p
  Eigen::VectorXd y;          // n
  Eigen::MatrixXd true_beta;  // n x p
  Eigen::VectorXd true_g;     // n
  std::vector<Partition> true_labels;
};

/// Locations uniform on the domain, then covariates, intercept and noise, all
/// from independent streams derived from `seed`.
SyntheticDataset gen_scenario(const ScenarioSpec& spec, std::uint64_t seed);

}  // namespace shaplm
