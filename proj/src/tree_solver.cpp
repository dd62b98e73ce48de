#include "shaplm/tree_solver.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace shaplm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nondecreasing continuous piecewise-linear function f(t). Left of every knot
// f(t) = s_left t + i_left; crossing a knot at tau adds ds to the slope (and
// -ds tau to the intercept). The sums over knots give the rightmost line.
// Knots at the same tau are merged, so no segment has zero width. `scale`
// bounds every slope (the summed curvature of the subtree); slopes below
// kFlat * scale are rounding residue of pieces that cancel exactly.
constexpr double kFlat = 1e-12;

struct Derivative {
  double s_left = 0.0, i_left = 0.0;
  double sum_ds = 0.0, sum_ds_tau = 0.0;
  double scale = 0.0;
  std::map<double, double> knots;

  void add_knot(double tau, double ds) {
    sum_ds += ds;
    sum_ds_tau += ds * tau;
    auto [it, fresh] = knots.emplace(tau, ds);
    if (!fresh) {
      it->second += ds;
      const double left = it->second;
      if (std::abs(left) <= kFlat * scale) {
        sum_ds -= left;
        sum_ds_tau -= left * tau;
        knots.erase(it);
      }
    }
  }

  void absorb(Derivative&& other) {
    s_left += other.s_left;
    i_left += other.i_left;
    scale += other.scale;
    if (other.knots.size() > knots.size()) {
      knots.swap(other.knots);
      std::swap(sum_ds, other.sum_ds);
      std::swap(sum_ds_tau, other.sum_ds_tau);
    }
    for (const auto& [tau, ds] : other.knots) add_knot(tau, ds);
  }

  void set_constant(double level) {
    knots.clear();
    s_left = 0.0;
    i_left = level;
    sum_ds = sum_ds_tau = 0.0;
  }

  // Replaces f by max(f, level). Returns the point where f first reaches
  // `level`: -inf when f >= level everywhere, +inf when f < level everywhere.
  double clamp_below(double level) {
    double s = s_left, i = i_left, prev = -kInf;
    for (;;) {
      const bool last = knots.empty();
      const double tau = last ? 0.0 : knots.begin()->first;
      if (last || s * tau + i >= level) {
        const bool rising = s > kFlat * scale;
        double t;
        if (rising) {
          t = (level - i) / s;
          if (!last) t = std::min(t, tau);
          t = std::max(t, prev);
        } else if (std::isfinite(prev)) {
          t = prev;
        } else {
          if (i >= level) return -kInf;
          set_constant(level);
          return kInf;
        }
        s_left = 0.0;
        i_left = level;
        if (s != 0.0) add_knot(t, s);
        return t;
      }
      const double ds = knots.begin()->second;
      s += ds;
      i -= ds * tau;
      sum_ds -= ds;
      sum_ds_tau -= ds * tau;
      knots.erase(knots.begin());
      prev = tau;
    }
  }

  // Replaces f by min(f, level). Returns the last point where f is at most
  // `level`: +inf when f <= level everywhere, -inf when f > level everywhere.
  double clamp_above(double level) {
    double s = s_left + sum_ds, i = i_left - sum_ds_tau, next = kInf;
    for (;;) {
      const bool last = knots.empty();
      const double tau = last ? 0.0 : std::prev(knots.end())->first;
      if (last || s * tau + i <= level) {
        const bool rising = s > kFlat * scale;
        double t;
        if (rising) {
          t = (level - i) / s;
          if (!last) t = std::max(t, tau);
          t = std::min(t, next);
        } else if (std::isfinite(next)) {
          t = next;
        } else {
          if (i <= level) return kInf;
          set_constant(level);
          return -kInf;
        }
        if (s != 0.0) add_knot(t, -s);
        return t;
      }
      const auto it = std::prev(knots.end());
      const double ds = it->second;
      s -= ds;
      i += ds * tau;
      sum_ds -= ds;
      sum_ds_tau -= ds * tau;
      knots.erase(it);
      next = tau;
    }
  }
};

// Component label of every vertex after deleting tree edges with nonzero
// theta (edge l of the tree is entry l of theta_edges).
std::vector<int> tree_components(const SpanningTree& tree, const Eigen::Ref<const Eigen::VectorXd>& theta_edges,
                                 int& count) {
  const int n = tree.num_vertices();
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  const auto& parent = tree.parent();
  const auto& parent_edge = tree.parent_edge();
  count = 0;
  for (int v : tree.bfs_order()) {
    const int p = parent[v];
    if (p >= 0 && theta_edges[parent_edge[v]] == 0.0) {
      label[v] = label[p];
    } else {
      label[v] = count++;
    }
  }
  return label;
}

}  // namespace

Eigen::VectorXd tree_fused_lasso(const SpanningTree& tree, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, const Eigen::VectorXd& gamma) {
  const int n = tree.num_vertices();
  if (a.size() != n || b.size() != n || gamma.size() != n - 1) {
    throw std::invalid_argument("tree_fused_lasso: size mismatch");
  }
  const auto& parent = tree.parent();
  const auto& parent_edge = tree.parent_edge();
  const auto& order = tree.bfs_order();

  std::vector<Derivative> msg(static_cast<std::size_t>(n));
  std::vector<double> lo(static_cast<std::size_t>(n), -kInf), hi(static_cast<std::size_t>(n), kInf);
  for (int v = 0; v < n; ++v) {
    if (!(a[v] >= 0)) throw std::invalid_argument("tree_fused_lasso: a must be >= 0");
    msg[v].s_left = a[v];
    msg[v].i_left = -b[v];
    msg[v].scale = a[v];
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int v = *it;
    const int p = parent[v];
    if (p < 0) continue;
    const double g = gamma[parent_edge[v]];
    if (!(g >= 0)) throw std::invalid_argument("tree_fused_lasso: edge penalties must be >= 0");
    if (!std::isinf(g)) {
      lo[v] = msg[v].clamp_below(-g);
      hi[v] = msg[v].clamp_above(g);
    }
    msg[p].absorb(std::move(msg[v]));
    msg[v] = Derivative{};
  }

  Eigen::VectorXd beta(n);
  const int root = tree.root();
  Derivative& top = msg[root];
  const double first_knot = top.knots.empty() ? 0.0 : top.knots.begin()->first;
  double t = top.clamp_below(0.0);
  if (std::isinf(t)) t = (t < 0 && top.i_left == 0.0) ? first_knot : 0.0;
  beta[root] = t;
  for (int v : order) {
    const int p = parent[v];
    if (p < 0) continue;
    double value = beta[p];
    if (lo[v] <= hi[v]) {
      value = std::min(std::max(value, lo[v]), hi[v]);
    } else if (std::isfinite(lo[v]) && std::isfinite(hi[v])) {
      // Zero edge penalty: both breakpoints are the same point up to rounding.
      value = 0.5 * (lo[v] + hi[v]);
    }
    beta[v] = std::isfinite(value) ? value : beta[p];
  }
  return beta;
}

FitResult block_coordinate_descent(const TreeDesign& X, const RidgeBlock& spline,
                                   const Eigen::VectorXd& y, double lambda,
                                   const Eigen::VectorXd& weights, const SolverOptions& options,
                                   const Eigen::VectorXd* warm_start, ColumnCache* cache) {
  const Eigen::Index n = X.rows(), p = X.blocks(), P = X.cols();
  // The exact block step leaves each block's level free; a penalized mean
  // coordinate needs the coordinate-wise algorithm.
  for (Eigen::Index k = 0; k < p && weights.size() == P; ++k) {
    if (weights[k * n + n - 1] != 0.0) {
      return block_coordinate_descent<TreeDesign>(X, spline, y, lambda, weights, options, warm_start, cache);
    }
  }
  if (y.size() != n) throw std::invalid_argument("solver: response length does not match design rows");
  if (weights.size() != P) throw std::invalid_argument("solver: penalty weight length does not match design columns");
  if (spline.rows() != n) throw std::invalid_argument("solver: spline block rows do not match design rows");
  if (!(lambda >= 0)) throw std::invalid_argument("solver: lambda must be >= 0");
  for (Eigen::Index l = 0; l < P; ++l) {
    if (!(weights[l] >= 0)) throw std::invalid_argument("solver: penalty weights must be >= 0");
  }
  const double dn = static_cast<double>(n);
  const auto& tt = X.transforms();
  const Eigen::MatrixXd& Xm = X.X();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(P);
  if (warm_start) {
    if (warm_start->size() != P) throw std::invalid_argument("solver: warm start has wrong length");
    theta = *warm_start;
  }
  for (Eigen::Index l = 0; l < P; ++l) {
    if (is_pinned(weights[l])) theta[l] = 0.0;
  }

  Eigen::MatrixXd beta(n, p), fitted(n, p), curvature(n, p);
  std::vector<Eigen::VectorXd> gamma(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k) {
    beta.col(k) = tt[k].apply_inverse(theta.segment(k * n, n));
    fitted.col(k) = Xm.col(k).cwiseProduct(beta.col(k));
    curvature.col(k) = Xm.col(k).array().square() / dn;
    gamma[k].resize(n - 1);
    for (Eigen::Index l = 0; l < n - 1; ++l) {
      const double w = weights[k * n + l];
      gamma[k][l] = is_pinned(w) ? std::numeric_limits<double>::infinity() : lambda * w;
    }
  }
  Eigen::VectorXd Xb = fitted.rowwise().sum();

  Eigen::VectorXd psi, spline_fit = Eigen::VectorXd::Zero(n), resid;
  auto update_psi = [&]() {
    if (spline.empty()) return;
    psi = spline.solve(y - Xb);
    spline_fit.noalias() = spline.Btilde() * psi;
  };
  auto set_theta = [&](const Eigen::VectorXd& next) {
    theta = next;
    for (Eigen::Index k = 0; k < p; ++k) {
      beta.col(k) = tt[k].apply_inverse(theta.segment(k * n, n));
      fitted.col(k) = Xm.col(k).cwiseProduct(beta.col(k));
    }
    Xb = fitted.rowwise().sum();
    update_psi();
  };
  auto objective = [&]() {
    resid = y - Xb - spline_fit;
    double l1 = 0.0;
    for (Eigen::Index l = 0; l < P; ++l) {
      if (theta[l] != 0.0 && !is_pinned(weights[l])) l1 += weights[l] * std::abs(theta[l]);
    }
    return 0.5 * resid.squaredNorm() / dn + (spline.empty() ? 0.0 : spline.penalty(psi)) + lambda * l1;
  };
  auto kkt = [&](const Eigen::VectorXd& grad) {
    double worst = 0.0;
    for (Eigen::Index l = 0; l < P; ++l) {
      const double w = weights[l];
      if (is_pinned(w)) continue;
      double viol;
      if (w == 0.0) {
        viol = std::abs(grad[l]);
      } else if (theta[l] != 0.0) {
        viol = std::abs(grad[l] - lambda * w * (theta[l] > 0 ? 1.0 : -1.0));
      } else {
        viol = std::max(0.0, std::abs(grad[l]) - lambda * w);
      }
      worst = std::max(worst, viol);
    }
    return worst;
  };

  // Face solve: with the zero pattern and the signs of theta held fixed the
  // problem is an equality-constrained quadratic in the cluster levels, solved
  // directly. If the solution keeps every sign it is exact on that face;
  // otherwise we step towards it until the first difference reaches zero
  // (merging that pair) and retry. Each step lowers the objective.
  auto polish = [&]() {
    for (int attempt = 0; attempt < 200; ++attempt) {
      std::vector<std::vector<int>> cluster(static_cast<std::size_t>(p));
      std::vector<Eigen::Index> offset(static_cast<std::size_t>(p) + 1, 0);
      for (Eigen::Index k = 0; k < p; ++k) {
        int count = 0;
        cluster[k] = tree_components(tt[k].tree(), theta.segment(k * n, n - 1), count);
        offset[k + 1] = offset[k] + count;
      }
      const Eigen::Index m = offset[p];
      if (m > n) return false;
      Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, m);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
      std::vector<Eigen::Index> col(static_cast<std::size_t>(p));
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < p; ++k) col[k] = offset[k] + cluster[k][i];
        for (Eigen::Index k = 0; k < p; ++k) {
          rhs[col[k]] += Xm(i, k) * y[i];
          for (Eigen::Index j = 0; j < p; ++j) S(col[k], col[j]) += Xm(i, k) * Xm(i, j);
        }
      }
      Eigen::MatrixXd W;  // Ztilde' Btilde
      if (!spline.empty()) {
        const Eigen::MatrixXd& Bt = spline.Btilde();
        W = Eigen::MatrixXd::Zero(m, Bt.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index k = 0; k < p; ++k) W.row(offset[k] + cluster[k][i]) += Xm(i, k) * Bt.row(i);
        }
        const Eigen::MatrixXd GiWt = spline.gram_solve(W.transpose());
        S.noalias() -= W * GiWt;
        rhs.noalias() -= GiWt.transpose() * (Bt.transpose() * y);
      }
      for (Eigen::Index k = 0; k < p; ++k) {
        const auto& edges = tt[k].tree().edges();
        for (Eigen::Index l = 0; l < n - 1; ++l) {
          const double t = theta[k * n + l], w = weights[k * n + l];
          if (t == 0.0 || w == 0.0) continue;
          const auto [a, b] = edges[l];
          const double g = dn * lambda * w * (t > 0 ? 1.0 : -1.0);
          rhs[offset[k] + cluster[k][std::min(a, b)]] -= g;
          rhs[offset[k] + cluster[k][std::max(a, b)]] += g;
        }
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
      if (ldlt.info() != Eigen::Success) return false;
      const Eigen::VectorXd levels = ldlt.solve(rhs);
      if (!levels.allFinite()) return false;

      Eigen::VectorXd target(P);
      for (Eigen::Index k = 0; k < p; ++k) {
        Eigen::VectorXd bk(n);
        for (Eigen::Index i = 0; i < n; ++i) bk[i] = levels[offset[k] + cluster[k][i]];
        target.segment(k * n, n) = tt[k].apply(bk);
      }
      // Largest step keeping every penalized sign.
      double step = 1.0;
      for (Eigen::Index k = 0; k < p; ++k) {
        for (Eigen::Index l = 0; l < n - 1; ++l) {
          const Eigen::Index c = k * n + l;
          if (theta[c] == 0.0 || weights[c] == 0.0) continue;
          if (target[c] * theta[c] <= 0.0) step = std::min(step, theta[c] / (theta[c] - target[c]));
        }
      }
      Eigen::VectorXd next = theta + step * (target - theta);
      for (Eigen::Index k = 0; k < p; ++k) {
        for (Eigen::Index l = 0; l < n - 1; ++l) {
          const Eigen::Index c = k * n + l;
          if (theta[c] == 0.0) {
            next[c] = 0.0;
          } else if (weights[c] != 0.0 && (next[c] * theta[c] <= 0.0 ||
                                            std::abs(next[c]) <= 1e-12 * std::abs(theta[c]))) {
            next[c] = 0.0;
          }
        }
      }
      const double before = objective();
      const Eigen::VectorXd saved = theta;
      set_theta(next);
      if (objective() > before + 1e-14 * std::max(1.0, std::abs(before))) {
        set_theta(saved);
        return false;
      }
      if (step == 1.0) return true;
    }
    return false;
  };

  FitResult fit;
  update_psi();
  double prev = objective();
  fit.objective_trace.push_back(prev);
  std::vector<char> pattern(static_cast<std::size_t>(P), 0), last_pattern;
  int polish_wait = 1, since_polish = 0;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    for (Eigen::Index k = 0; k < p; ++k) {
      const Eigen::VectorXd partial = y - spline_fit - (Xb - fitted.col(k));
      const Eigen::VectorXd lin = Xm.col(k).cwiseProduct(partial) / dn;
      beta.col(k) = tree_fused_lasso(tt[k].tree(), curvature.col(k), lin, gamma[k]);
      const Eigen::VectorXd next = Xm.col(k).cwiseProduct(beta.col(k));
      Xb += next - fitted.col(k);
      fitted.col(k) = next;
      theta.segment(k * n, n) = tt[k].apply(beta.col(k));
    }
    update_psi();
    // Recompute the sum now and then so rounding in the running update does not build up.
    if (iter % 32 == 0) Xb = fitted.rowwise().sum();

    for (Eigen::Index l = 0; l < P; ++l) pattern[l] = theta[l] == 0.0 ? 0 : (theta[l] > 0 ? 1 : 2);
    ++since_polish;
    if (pattern == last_pattern && since_polish >= polish_wait) {
      since_polish = 0;
      const bool ok = polish();
      polish_wait = ok ? 1 : std::min(2 * polish_wait, 64);
    }
    last_pattern = pattern;

    const double obj = objective();
    fit.objective_trace.push_back(obj);
    fit.iterations = iter;
    const double change = (prev - obj) / std::max(1.0, std::abs(obj));
    prev = obj;
    if (change >= options.tol) continue;
    fit.kkt_residual = kkt(X.transpose_times(resid) / dn);
    if (fit.kkt_residual <= options.kkt_tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) fit.kkt_residual = kkt(X.transpose_times(resid) / dn);

  fit.theta_hat = std::move(theta);
  fit.psi_hat = spline.empty() ? Eigen::VectorXd() : psi;
  fit.residual = std::move(resid);
  fit.objective = prev;
  return fit;
}

}  // namespace shaplm
