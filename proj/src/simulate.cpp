#include "shaplm/simulate.hpp"

#include "shaplm/solver.hpp"

#include <Eigen/Cholesky>

#include <random>
#include <stdexcept>

namespace shaplm {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over a combined state
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void GpSpec::validate() const {
  if (!(range > 0)) throw std::invalid_argument("gp: range must be > 0");
  if (!(variance > 0)) throw std::invalid_argument("gp: variance must be > 0");
  if (!(jitter >= 0)) throw std::invalid_argument("gp: jitter must be >= 0");
}

Eigen::MatrixXd exponential_covariance(std::span<const Point2> locations, const GpSpec& spec) {
  const auto n = static_cast<Eigen::Index>(locations.size());
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    C(i, i) = spec.variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double c = spec.variance * std::exp(-(locations[i] - locations[j]).norm() / spec.range);
      C(i, j) = C(j, i) = c;
    }
  }
  return C;
}

Eigen::VectorXd sample_gp(std::span<const Point2> locations, const GpSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (locations.size() > 5000) throw std::invalid_argument("sample_gp: dense sampler limited to 5000 locations");
  const auto n = static_cast<Eigen::Index>(locations.size());
  Eigen::MatrixXd C = exponential_covariance(locations, spec);
  Eigen::LLT<Eigen::MatrixXd> chol;
  double jitter = spec.jitter;
  for (;;) {
    Eigen::MatrixXd Cj = C;
    Cj.diagonal().array() += jitter;
    chol.compute(Cj);
    if (chol.info() == Eigen::Success) break;
    jitter = jitter > 0 ? jitter * 10 : 1e-12;
    if (jitter > 1e-6 * 1.0001) throw NumericalError("sample_gp: covariance factorization failed");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return chol.matrixL() * z;
}

Eigen::MatrixXd gen_covariates(std::span<const Point2> locations, double c, double r_prime,
                               std::uint64_t seed) {
  if (!(c >= 0 && c <= 1)) throw std::invalid_argument("collinearity c must lie in [0, 1]");
  const GpSpec gp{r_prime, 1.0, 1e-10};
  const Eigen::VectorXd z1 = sample_gp(locations, gp, derive_seed(seed, 1));
  const Eigen::VectorXd z2 = sample_gp(locations, gp, derive_seed(seed, 2));
  Eigen::MatrixXd X(z1.size(), 2);
  X.col(0) = z1;
  X.col(1) = c * z1 + std::sqrt(1.0 - c * c) * z2;
  return X;
}

bool Region::contains(const Point2& p) const {
  if (kind == Kind::Disk) return (p - center).squaredNorm() <= radius * radius;
  return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
}

int PiecewiseSurface::label(const Point2& p) const {
  for (std::size_t r = 0; r < regions.size(); ++r) {
    if (regions[r].contains(p)) return static_cast<int>(r);
  }
  throw std::invalid_argument("piecewise surface: point (" + std::to_string(p.x()) + ", " +
                              std::to_string(p.y()) + ") is not covered by any region");
}

PiecewiseSurface quadrant_surface(const Rect& domain, std::array<double, 4> values) {
  const double mx = 0.5 * (domain.xmin + domain.xmax), my = 0.5 * (domain.ymin + domain.ymax);
  PiecewiseSurface s;
  auto rect = [](double x0, double y0, double x1, double y1, double v) {
    Region r;
    r.kind = Region::Kind::Rect;
    r.lo = {x0, y0};
    r.hi = {x1, y1};
    r.value = v;
    return r;
  };
  s.regions.push_back(rect(domain.xmin, domain.ymin, mx, my, values[0]));
  s.regions.push_back(rect(mx, domain.ymin, domain.xmax, my, values[1]));
  s.regions.push_back(rect(domain.xmin, my, mx, domain.ymax, values[2]));
  s.regions.push_back(rect(mx, my, domain.xmax, domain.ymax, values[3]));
  return s;
}

PiecewiseSurface default_beta1(const Rect& domain) { return quadrant_surface(domain, {-2, -1, 1, 2}); }

PiecewiseSurface default_beta2(const Rect& domain) {
  PiecewiseSurface s;
  Region disk;
  disk.kind = Region::Kind::Disk;
  disk.center = {0.5 * (domain.xmin + domain.xmax), 0.5 * (domain.ymin + domain.ymax)};
  disk.radius = 0.25 * std::min(domain.xmax - domain.xmin, domain.ymax - domain.ymin);
  disk.value = 2.0;
  s.regions.push_back(disk);
  const auto quads = quadrant_surface(domain, {-2, -1, 0, 1});
  s.regions.insert(s.regions.end(), quads.regions.begin(), quads.regions.end());
  return s;
}

ScenarioSpec ScenarioSpec::defaults(double intercept_range) {
  ScenarioSpec spec;
  spec.beta_surfaces = {default_beta1(spec.domain), default_beta2(spec.domain)};
  spec.intercept.kind = InterceptSpec::Kind::Gp;
  spec.intercept.gp = GpSpec{intercept_range, 1.0, 1e-10};
  return spec;
}

void ScenarioSpec::validate() const {
  if (n < 3) throw std::invalid_argument("scenario: n must be >= 3");
  if (!(domain.xmax > domain.xmin) || !(domain.ymax > domain.ymin)) {
    throw std::invalid_argument("scenario: empty domain");
  }
  if (!(sigma2 >= 0)) throw std::invalid_argument("scenario: sigma2 must be >= 0");
  if (!(collinearity >= 0 && collinearity <= 1)) throw std::invalid_argument("scenario: c must lie in [0, 1]");
  if (!(covariate_range > 0)) throw std::invalid_argument("scenario: r_prime must be > 0");
  if (beta_surfaces.empty()) throw std::invalid_argument("scenario: need at least one beta surface");
  for (const auto& s : beta_surfaces) {
    if (s.regions.empty()) throw std::invalid_argument("scenario: beta surface without regions");
  }
  if (intercept.kind == InterceptSpec::Kind::Gp) intercept.gp.validate();
  if (intercept.kind == InterceptSpec::Kind::Piecewise && intercept.surface.regions.empty()) {
    throw std::invalid_argument("scenario: piecewise intercept without regions");
  }
  if (intercept.kind == InterceptSpec::Kind::Function && !intercept.function) {
    throw std::invalid_argument("scenario: function intercept without a function");
  }
}

SyntheticDataset gen_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int n = spec.n;
  const auto p = static_cast<Eigen::Index>(spec.beta_surfaces.size());
  SyntheticDataset ds;

  std::mt19937_64 loc_rng(derive_seed(seed, 10));
  std::uniform_real_distribution<double> ux(spec.domain.xmin, spec.domain.xmax);
  std::uniform_real_distribution<double> uy(spec.domain.ymin, spec.domain.ymax);
  ds.locations.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = ux(loc_rng);
    ds.locations.emplace_back(x, uy(loc_rng));
  }

  // Covariates: x1 = z1, x_k = c z1 + sqrt(1 - c^2) z_k.
  const GpSpec cov_gp{spec.covariate_range, 1.0, 1e-10};
  ds.X.resize(n, p);
  const Eigen::VectorXd z1 = sample_gp(ds.locations, cov_gp, derive_seed(seed, 20));
  ds.X.col(0) = z1;
  const double c = spec.collinearity;
  for (Eigen::Index k = 1; k < p; ++k) {
    const Eigen::VectorXd zk = sample_gp(ds.locations, cov_gp, derive_seed(seed, 20 + static_cast<std::uint64_t>(k)));
    ds.X.col(k) = c * z1 + std::sqrt(1.0 - c * c) * zk;
  }

  ds.true_beta.resize(n, p);
  ds.true_labels.assign(static_cast<std::size_t>(p), Partition{std::vector<int>(static_cast<std::size_t>(n))});
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto& surf = spec.beta_surfaces[k];
    for (int i = 0; i < n; ++i) {
      const int lab = surf.label(ds.locations[i]);
      ds.true_labels[k].labels[i] = lab;
      ds.true_beta(i, k) = surf.regions[lab].value;
    }
  }

  switch (spec.intercept.kind) {
    case InterceptSpec::Kind::Gp:
      ds.true_g = sample_gp(ds.locations, spec.intercept.gp, derive_seed(seed, 30));
      break;
    case InterceptSpec::Kind::Zero:
      ds.true_g = Eigen::VectorXd::Zero(n);
      break;
    case InterceptSpec::Kind::Piecewise:
      ds.true_g.resize(n);
      for (int i = 0; i < n; ++i) ds.true_g[i] = spec.intercept.surface.value(ds.locations[i]);
      break;
    case InterceptSpec::Kind::Function:
      ds.true_g.resize(n);
      for (int i = 0; i < n; ++i) ds.true_g[i] = spec.intercept.function(ds.locations[i]);
      break;
  }

  std::mt19937_64 noise_rng(derive_seed(seed, 40));
  std::normal_distribution<double> normal(0.0, std::sqrt(spec.sigma2));
  ds.y = ds.true_g + (ds.X.cwiseProduct(ds.true_beta)).rowwise().sum();
  if (spec.sigma2 > 0) {
    for (int i = 0; i < n; ++i) ds.y[i] += normal(noise_rng);
  }
  return ds;
}

}  // namespace shaplm
