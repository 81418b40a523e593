#include "atac/function_class.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "atac/errors.hpp"
#include "atac/kernels.hpp"
#include "atac/rng.hpp"

namespace atac {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

MatrixXd dense_jacobian(const FunctionClass& fclass) {
  const auto rows = static_cast<Eigen::Index>(fclass.num_states() * fclass.num_actions());
  const auto cols = static_cast<Eigen::Index>(fclass.parameter_dim());
  const auto j = fclass.jacobian();
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      j.data(), rows, cols);
}

// Pseudo-inverse of a symmetric PSD matrix through its eigendecomposition.
MatrixXd psd_pinv(const MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g);
  const VectorXd& e = eig.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, e.cwiseAbs().maxCoeff());
  VectorXd inv(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) inv(i) = e(i) > cutoff ? 1.0 / e(i) : 0.0;
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

struct BallFit {
  VectorXd params;
  double value = 0.0;
};

// min Σ w (φ·x + b − m)² over ‖x‖ ≤ bound with b free when `bias`. `phi` holds
// only the weight features.
BallFit ball_least_squares(const MatrixXd& phi, bool bias, const VectorXd& w, const VectorXd& m,
                           double bound) {
  const Eigen::Index n = phi.rows();
  const Eigen::Index d = phi.cols();
  const double wsum = w.sum();
  MatrixXd x = phi;
  VectorXd y = m;
  if (bias && wsum > 0.0) {
    // Eliminate the bias by W-centering.
    const VectorXd xbar = (phi.transpose() * w) / wsum;
    const double ybar = w.dot(m) / wsum;
    x.rowwise() -= xbar.transpose();
    y.array() -= ybar;
  }
  const VectorXd sw = w.cwiseSqrt();
  const MatrixXd xs = sw.asDiagonal() * x;
  const VectorXd ys = sw.cwiseProduct(y);
  const MatrixXd gram = xs.transpose() * xs;
  const VectorXd rhs = xs.transpose() * ys;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  const VectorXd& e = eig.eigenvalues();
  const VectorXd z = eig.eigenvectors().transpose() * rhs;
  const double cutoff = 1e-12 * std::max(1.0, e.cwiseAbs().maxCoeff());
  auto solve = [&](double lambda) {
    VectorXd u(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double den = e(i) + lambda;
      u(i) = den > cutoff ? z(i) / den : 0.0;
    }
    return VectorXd(eig.eigenvectors() * u);
  };
  VectorXd weights = solve(0.0);
  if (weights.norm() > bound) {
    double lo = 0.0;
    double hi = rhs.norm() / bound + 1.0;
    while (solve(hi).norm() > bound) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (solve(mid).norm() > bound ? lo : hi) = mid;
    }
    weights = solve(hi);
    if (weights.norm() > bound) weights *= bound / weights.norm();
  }
  BallFit fit;
  fit.params.resize(d + (bias ? 1 : 0));
  fit.params.head(d) = weights;
  VectorXd pred = phi * weights;
  if (bias) {
    const double b = wsum > 0.0 ? w.dot(m - pred) / wsum : 0.0;
    fit.params(d) = b;
    pred.array() += b;
  }
  fit.value = w.dot((pred - m).cwiseAbs2());
  (void)n;
  return fit;
}

const Mdp& population_mdp(const PopulationSource& src) {
  if (!src.mdp) throw ArgumentError("population source has no MDP");
  return *src.mdp;
}

const Dataset& sample_data(const SampleSource& src) {
  if (!src.data) throw ArgumentError("sample source has no dataset");
  return *src.data;
}

std::size_t start_state_of(const DataSource& source) {
  if (const auto* pop = std::get_if<PopulationSource>(&source))
    return population_mdp(*pop).start_state();
  return sample_data(std::get<SampleSource>(source)).meta().start_state;
}

// Quadratic model gᵀp + ½ pᵀHp of the objective in parameter space.
struct Quadratic {
  std::size_t n = 0;
  std::vector<double> h;  // row-major n × n
  std::vector<double> g;

  double value(std::span<const double> p, std::span<double> scratch) const {
    kernels::gemv(h, p, scratch, n, n);
    return kernels::dot(g, p) + 0.5 * kernels::dot(p, scratch);
  }
  void gradient(std::span<const double> p, std::span<double> out) const {
    kernels::gemv(h, p, out, n, n);
    kernels::axpby(1.0, g, 1.0, out);
  }
};

// Table-space linear coefficient c of the L (or f(s0,π)) term.
VectorXd linear_coefficient(const CriticObjective& obj, std::size_t S, std::size_t A) {
  VectorXd c = VectorXd::Zero(static_cast<Eigen::Index>(S * A));
  const auto& pi = obj.policy;
  if (obj.mode == PessimismMode::Absolute) {
    const std::size_t s0 = start_state_of(obj.source);
    for (std::size_t a = 0; a < A; ++a) c(static_cast<Eigen::Index>(s0 * A + a)) = pi(s0, a);
    return c;
  }
  if (const auto* pop = std::get_if<PopulationSource>(&obj.source)) {
    const auto marginal = pop->mu.state_marginal();
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a)
        c(static_cast<Eigen::Index>(s * A + a)) = marginal[s] * pi(s, a) - pop->mu(s, a);
  } else {
    const auto& st = sample_data(std::get<SampleSource>(obj.source)).stats();
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a)
        c(static_cast<Eigen::Index>(s * A + a)) =
            (st.s_count[s] * pi(s, a) - st.sa_count[s * A + a]) / st.n;
  }
  return c;
}

// A = I − γ P π in table space, with the model's reward and weights.
struct BellmanModel {
  MatrixXd a;
  VectorXd r;
  VectorXd w;
};

BellmanModel bellman_model(const CriticObjective& obj, std::size_t S, std::size_t A) {
  const auto SA = static_cast<Eigen::Index>(S * A);
  BellmanModel m{MatrixXd::Identity(SA, SA), VectorXd::Zero(SA), VectorXd::Zero(SA)};
  const auto& pi = obj.policy;
  auto add_row = [&](std::size_t sa, double gamma, auto next_prob) {
    for (std::size_t sn = 0; sn < S; ++sn) {
      const double p = next_prob(sn);
      if (p == 0.0) continue;
      for (std::size_t an = 0; an < A; ++an)
        m.a(static_cast<Eigen::Index>(sa), static_cast<Eigen::Index>(sn * A + an)) -=
            gamma * p * pi(sn, an);
    }
  };
  if (const auto* pop = std::get_if<PopulationSource>(&obj.source)) {
    const Mdp& mdp = population_mdp(*pop);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t sa = s * A + a;
        const auto next = mdp.next_state_distribution(s, a);
        add_row(sa, mdp.gamma(), [&](std::size_t sn) { return next[sn]; });
        m.r(static_cast<Eigen::Index>(sa)) = mdp.reward(s, a);
        m.w(static_cast<Eigen::Index>(sa)) = pop->mu(s, a);
      }
  } else {
    const Dataset& data = sample_data(std::get<SampleSource>(obj.source));
    const auto& st = data.stats();
    for (std::size_t sa = 0; sa < S * A; ++sa) {
      if (st.sa_count[sa] == 0.0) continue;
      const double* counts = st.sas_count.data() + sa * S;
      const double n = st.sa_count[sa];
      add_row(sa, data.gamma(), [&](std::size_t sn) { return counts[sn] / n; });
      m.r(static_cast<Eigen::Index>(sa)) = st.reward[sa];
      m.w(static_cast<Eigen::Index>(sa)) = n / st.n;
    }
  }
  return m;
}

Quadratic build_quadratic(const FunctionClass& fclass, const CriticObjective& obj) {
  const std::size_t S = fclass.num_states();
  const std::size_t A = fclass.num_actions();
  const MatrixXd j = dense_jacobian(fclass);
  const VectorXd c = linear_coefficient(obj, S, A);
  VectorXd g = j.transpose() * c;
  MatrixXd h = MatrixXd::Zero(j.cols(), j.cols());
  if (obj.beta > 0.0) {
    const BellmanModel model = bellman_model(obj, S, A);
    const MatrixXd aj = model.a * j;
    if (std::holds_alternative<PopulationSource>(obj.source)) {
      // E = (AJp − R)ᵀ W (AJp − R)
      const MatrixXd waj = model.w.asDiagonal() * aj;
      h = 2.0 * obj.beta * aj.transpose() * waj;
      g -= 2.0 * obj.beta * waj.transpose() * model.r;
    } else {
      // E = ‖Π_W (AJp − r)‖²_W with Π_W the W-orthogonal projection onto range J.
      const MatrixXd jw = j.transpose() * model.w.asDiagonal();
      const MatrixXd gram_pinv = psd_pinv(jw * j);
      const MatrixXd mx = jw * aj;
      const VectorXd y = jw * model.r;
      h = 2.0 * obj.beta * mx.transpose() * gram_pinv * mx;
      g -= 2.0 * obj.beta * mx.transpose() * (gram_pinv * y);
    }
    h = 0.5 * (h + h.transpose());
  }
  Quadratic q;
  q.n = static_cast<std::size_t>(j.cols());
  q.g = to_std(g);
  q.h.resize(q.n * q.n);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      q.h.data(), h.rows(), h.cols()) = h;
  return q;
}

double power_iteration(const Quadratic& q, std::size_t iterations) {
  std::vector<double> v(q.n), hv(q.n);
  for (std::size_t i = 0; i < q.n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  double lambda = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const double norm = std::sqrt(kernels::dot(v, v));
    if (norm == 0.0) return 0.0;
    for (double& x : v) x /= norm;
    kernels::gemv(q.h, v, hv, q.n, q.n);
    lambda = std::sqrt(kernels::dot(hv, hv));
    v.swap(hv);
  }
  return lambda;
}

struct QuadResult {
  std::vector<double> p;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

double projected_gradient_norm(const FunctionClass& fclass, const Quadratic& q,
                               std::span<const double> p, double step,
                               std::vector<double>& grad) {
  q.gradient(p, grad);
  std::vector<double> trial(p.begin(), p.end());
  kernels::axpby(-step, grad, 1.0, trial);
  const auto proj = project_member(fclass, trial);
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sq += (p[i] - proj[i]) * (p[i] - proj[i]);
  return std::sqrt(sq) / step;
}

// Accelerated projected gradient with adaptive restart. Stops on the
// gradient-mapping norm; the roundoff floor keeps stiff problems from spinning.
QuadResult minimize_quadratic(const FunctionClass& fclass, const Quadratic& q,
                              std::vector<double> start, const SolveOptions& opt) {
  const std::size_t n = q.n;
  QuadResult res;
  double lip = 1.05 * power_iteration(q, opt.power_iterations);
  if (!(lip > 0.0)) lip = 1e-12;
  double hnorm = 0.0;
  for (double v : q.h) hnorm = std::max(hnorm, std::abs(v));
  double gnorm = 0.0;
  for (double v : q.g) gnorm = std::max(gnorm, std::abs(v));

  std::vector<double> x = project_member(fclass, start);
  std::vector<double> y = x, grad(n), scratch(n), x_new(n);
  double t = 1.0;
  auto tolerance = [&](std::span<const double> p) {
    double pmax = 0.0;
    for (double v : p) pmax = std::max(pmax, std::abs(v));
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() *
                         (gnorm + hnorm * pmax * static_cast<double>(n));
    return std::max(opt.gradient_tolerance, floor);
  };
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    res.gradient_norm = projected_gradient_norm(fclass, q, x, 1.0 / lip, grad);
    if (res.gradient_norm <= tolerance(x)) {
      res.converged = true;
      res.iterations = it;
      res.p = std::move(x);
      return res;
    }
    q.gradient(y, grad);
    const double fy = q.value(y, scratch);
    for (;;) {
      std::vector<double> trial = y;
      kernels::axpby(-1.0 / lip, grad, 1.0, trial);
      x_new = project_member(fclass, trial);
      double lin = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = x_new[i] - y[i];
        lin += grad[i] * d;
        sq += d * d;
      }
      const double fx = q.value(x_new, scratch);
      if (fx <= fy + lin + 0.5 * lip * sq + 1e-12 * (1.0 + std::abs(fy))) break;
      lip *= 2.0;
    }
    double restart = 0.0;
    for (std::size_t i = 0; i < n; ++i) restart += (y[i] - x_new[i]) * (x_new[i] - x[i]);
    if (restart > 0.0) t = 1.0;
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_new;
    for (std::size_t i = 0; i < n; ++i) y[i] = x_new[i] + momentum * (x_new[i] - x[i]);
    x.swap(x_new);
    t = t_new;
  }
  res.gradient_norm = projected_gradient_norm(fclass, q, x, 1.0 / lip, grad);
  res.converged = res.gradient_norm <= tolerance(x);
  res.iterations = opt.max_iterations;
  res.p = std::move(x);
  return res;
}

// β = 0: the objective is linear, so the minimizer sits on the boundary.
std::vector<double> linear_minimizer(const FunctionClass& fclass, const Quadratic& q,
                                     std::vector<double> start) {
  std::vector<double> p = project_member(fclass, start);
  if (fclass.kind() == ClassKind::TabularBox) {
    for (std::size_t i = 0; i < q.n; ++i) {
      if (q.g[i] < 0.0) p[i] = fclass.vmax();
      else if (q.g[i] > 0.0) p[i] = 0.0;
    }
    return p;
  }
  const std::size_t d = fclass.feature_dim();
  if (fclass.has_bias() && std::abs(q.g[d]) > 1e-12)
    throw ArgumentError("critic objective is unbounded below: the bias is free and β = 0");
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) norm += q.g[i] * q.g[i];
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (std::size_t i = 0; i < d; ++i) p[i] = -fclass.weight_bound() * q.g[i] / norm;
  return p;
}

// Unconstrained stationary point of the model, when the Hessian is definite.
std::optional<std::vector<double>> newton_point(const Quadratic& q) {
  const auto n = static_cast<Eigen::Index>(q.n);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      h(q.h.data(), n, n);
  Eigen::LLT<MatrixXd> llt{MatrixXd(h)};
  if (llt.info() != Eigen::Success) return std::nullopt;
  const VectorXd p = llt.solve(-to_eigen(q.g));
  if (!p.allFinite()) return std::nullopt;
  return to_std(p);
}

// Primal active-set steps for the box: a minimum-norm Newton step on the free
// coordinates, or a descent move along the Hessian null space up to a bound.
std::vector<double> box_active_set(const FunctionClass& fclass, const Quadratic& q,
                                   std::vector<double> x, std::size_t max_steps) {
  const auto n = static_cast<Eigen::Index>(q.n);
  const double hi = fclass.vmax();
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      h(q.h.data(), n, n);
  const VectorXd g = to_eigen(q.g);
  VectorXd p = to_eigen(x);
  auto value = [&](const VectorXd& v) { return g.dot(v) + 0.5 * v.dot(h * v); };
  double scale = 0.0;
  for (double v : q.h) scale = std::max(scale, std::abs(v));
  for (std::size_t step = 0; step < max_steps; ++step) {
    const VectorXd grad = h * p + g;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool lower = p(i) <= 0.0 && grad(i) > 0.0;
      const bool upper = p(i) >= hi && grad(i) < 0.0;
      if (!lower && !upper) free.push_back(i);
    }
    VectorXd d;
    bool null_move = false;
    // Coordinates on a bound that the step would push outward are pinned and
    // the step recomputed.
    for (;;) {
      if (free.empty()) break;
      const auto m = static_cast<Eigen::Index>(free.size());
      MatrixXd hff(m, m);
      VectorXd gf(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        gf(a) = grad(free[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < m; ++b)
          hff(a, b) = h(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
      }
      Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(hff);
      cod.setThreshold(1e-12);
      d = -cod.solve(gf);
      const VectorXd residual = gf + hff * d;
      null_move = residual.norm() > 1e-9 * (1.0 + gf.norm());
      if (null_move) d = -residual;
      std::vector<Eigen::Index> kept;
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index i = free[static_cast<std::size_t>(a)];
        const bool blocked = (p(i) <= 0.0 && d(a) < 0.0) || (p(i) >= hi && d(a) > 0.0);
        if (!blocked) kept.push_back(i);
      }
      if (kept.size() == free.size()) break;
      free = std::move(kept);
    }
    if (free.empty()) break;
    const auto m = static_cast<Eigen::Index>(free.size());
    if (d.norm() <= 1e-15 * (1.0 + p.norm())) break;
    double alpha = null_move ? std::numeric_limits<double>::infinity() : 1.0;
    for (Eigen::Index a = 0; a < m; ++a) {
      const double pi = p(free[static_cast<std::size_t>(a)]);
      if (d(a) > 0.0) alpha = std::min(alpha, (hi - pi) / d(a));
      else if (d(a) < 0.0) alpha = std::min(alpha, -pi / d(a));
    }
    if (!std::isfinite(alpha) || alpha <= 0.0) break;
    VectorXd next = p;
    for (Eigen::Index a = 0; a < m; ++a) {
      const Eigen::Index i = free[static_cast<std::size_t>(a)];
      next(i) = std::clamp(p(i) + alpha * d(a), 0.0, hi);
    }
    if (!(value(next) < value(p) - 1e-15 * (1.0 + std::abs(value(p)) + scale))) break;
    p = std::move(next);
  }
  return to_std(p);
}

std::vector<double> random_feasible(const FunctionClass& fclass, Rng& rng,
                                    std::span<const double> center) {
  std::vector<double> p(fclass.parameter_dim());
  if (fclass.kind() == ClassKind::TabularBox) {
    for (double& v : p) v = rng.uniform(0.0, fclass.vmax());
    return p;
  }
  const std::size_t d = fclass.feature_dim();
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    p[i] = rng.normal();
    norm += p[i] * p[i];
  }
  norm = std::sqrt(norm);
  const double radius =
      fclass.weight_bound() * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) p[i] = norm > 0.0 ? p[i] * radius / norm : 0.0;
  if (fclass.has_bias()) {
    const double b = center.size() > d ? center[d] : 0.0;
    p[d] = b + (1.0 + std::abs(b)) * rng.normal();
  }
  return p;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

FunctionClass FunctionClass::finite(std::vector<QTable> members, double vmax) {
  if (members.empty()) throw ArgumentError("finite class must have at least one member");
  if (!(vmax >= 0.0) || !std::isfinite(vmax)) throw ArgumentError("finite class: bad vmax");
  FunctionClass c;
  c.kind_ = ClassKind::FiniteEnumeration;
  c.states_ = members.front().num_states();
  c.actions_ = members.front().num_actions();
  c.vmax_ = vmax;
  if (c.states_ == 0 || c.actions_ == 0) throw ArgumentError("finite class: empty tables");
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!members[i].same_shape(members.front()))
      throw ArgumentError("finite class member " + std::to_string(i) + " has a different shape");
    for (double v : members[i].values())
      if (!(v >= 0.0 && v <= vmax))
        throw ArgumentError("finite class member " + std::to_string(i) +
                            " leaves [0, Vmax]");
  }
  c.members_ = std::move(members);
  return c;
}

FunctionClass FunctionClass::box(std::size_t num_states, std::size_t num_actions, double vmax) {
  if (num_states == 0 || num_actions == 0) throw ArgumentError("box class: empty shape");
  if (!(vmax >= 0.0) || !std::isfinite(vmax)) throw ArgumentError("box class: bad vmax");
  FunctionClass c;
  c.kind_ = ClassKind::TabularBox;
  c.states_ = num_states;
  c.actions_ = num_actions;
  c.vmax_ = vmax;
  return c;
}

FunctionClass FunctionClass::linear(std::size_t num_states, std::size_t num_actions,
                                    std::vector<double> features, std::size_t dim, double bound,
                                    bool bias_unconstrained) {
  if (num_states == 0 || num_actions == 0 || dim == 0)
    throw ArgumentError("linear class: empty shape");
  if (features.size() != num_states * num_actions * dim)
    throw ArgumentError("linear class: feature table must be (S*A) x dim");
  if (!all_finite(features)) throw ArgumentError("linear class: non-finite feature");
  if (!(bound > 0.0) || !std::isfinite(bound))
    throw ArgumentError("linear class: weight bound must be positive");
  FunctionClass c;
  c.kind_ = ClassKind::LinearBounded;
  c.states_ = num_states;
  c.actions_ = num_actions;
  c.features_ = std::move(features);
  c.dim_ = dim;
  c.bound_ = bound;
  c.bias_ = bias_unconstrained;
  return c;
}

const std::vector<QTable>& FunctionClass::members() const {
  if (kind_ != ClassKind::FiniteEnumeration)
    throw ArgumentError("members() is only defined for finite classes");
  return members_;
}

std::size_t FunctionClass::parameter_dim() const {
  switch (kind_) {
    case ClassKind::TabularBox: return states_ * actions_;
    case ClassKind::LinearBounded: return dim_ + (bias_ ? 1 : 0);
    default: throw NotParametric("finite classes have no parameter vector");
  }
}

QTable FunctionClass::evaluate(std::span<const double> params) const {
  if (params.size() != parameter_dim())
    throw ArgumentError("parameter vector has the wrong dimension");
  if (kind_ == ClassKind::TabularBox)
    return QTable(states_, actions_, std::vector<double>(params.begin(), params.end()));
  QTable f(states_, actions_);
  const double b = bias_ ? params[dim_] : 0.0;
  for (std::size_t sa = 0; sa < states_ * actions_; ++sa)
    f.values()[sa] = kernels::dot({features_.data() + sa * dim_, dim_}, params.first(dim_)) + b;
  return f;
}

std::vector<double> FunctionClass::pullback(std::span<const double> table_grad) const {
  if (table_grad.size() != states_ * actions_)
    throw ArgumentError("pullback: table gradient has the wrong size");
  if (kind_ == ClassKind::TabularBox) return {table_grad.begin(), table_grad.end()};
  std::vector<double> out(parameter_dim(), 0.0);
  for (std::size_t sa = 0; sa < states_ * actions_; ++sa) {
    const double g = table_grad[sa];
    if (g == 0.0) continue;
    for (std::size_t i = 0; i < dim_; ++i) out[i] += g * features_[sa * dim_ + i];
    if (bias_) out[dim_] += g;
  }
  return out;
}

std::vector<double> FunctionClass::jacobian() const {
  const std::size_t rows = states_ * actions_;
  const std::size_t cols = parameter_dim();
  std::vector<double> j(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (kind_ == ClassKind::TabularBox) {
      j[r * cols + r] = 1.0;
      continue;
    }
    for (std::size_t i = 0; i < dim_; ++i) j[r * cols + i] = features_[r * dim_ + i];
    if (bias_) j[r * cols + dim_] = 1.0;
  }
  return j;
}

std::vector<double> FunctionClass::parameters_of(const QTable& f) const {
  require_shape(f, states_, actions_, "parameters_of");
  if (kind_ == ClassKind::TabularBox) return {f.values().begin(), f.values().end()};
  if (kind_ == ClassKind::FiniteEnumeration) throw NotParametric("finite class");
  const MatrixXd j = dense_jacobian(*this);
  return to_std(j.completeOrthogonalDecomposition().solve(to_eigen(f.values())));
}

double FunctionClass::min_weighted_distance(std::span<const double> weights,
                                            std::span<const double> targets) const {
  const std::size_t SA = states_ * actions_;
  if (weights.size() != SA || targets.size() != SA)
    throw ArgumentError("min_weighted_distance: size mismatch");
  std::vector<double> residual(SA);
  switch (kind_) {
    case ClassKind::FiniteEnumeration: {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& member : members_) {
        for (std::size_t i = 0; i < SA; ++i) residual[i] = member.values()[i] - targets[i];
        best = std::min(best, kernels::weighted_sq_sum(weights, residual));
      }
      return best;
    }
    case ClassKind::TabularBox:
      for (std::size_t i = 0; i < SA; ++i)
        residual[i] = std::clamp(targets[i], 0.0, vmax_) - targets[i];
      return kernels::weighted_sq_sum(weights, residual);
    case ClassKind::LinearBounded: {
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          phi(features_.data(), static_cast<Eigen::Index>(SA), static_cast<Eigen::Index>(dim_));
      return ball_least_squares(phi, bias_, to_eigen(weights), to_eigen(targets), bound_).value;
    }
  }
  return 0.0;
}

std::vector<double> project_member(const FunctionClass& fclass, std::span<const double> raw) {
  if (!fclass.is_parametric()) throw NotParametric("projection on a finite class");
  if (raw.size() != fclass.parameter_dim())
    throw ArgumentError("project_member: parameter vector has the wrong dimension");
  std::vector<double> out(raw.begin(), raw.end());
  if (fclass.kind() == ClassKind::TabularBox) {
    for (double& v : out) v = std::clamp(v, 0.0, fclass.vmax());
    return out;
  }
  const std::size_t d = fclass.feature_dim();
  // Scaled by the largest entry so the squares cannot overflow.
  double top = 0.0;
  for (std::size_t i = 0; i < d; ++i) top = std::max(top, std::abs(out[i]));
  if (!(top > 0.0) || !std::isfinite(top)) return out;
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) norm += (out[i] / top) * (out[i] / top);
  norm = top * std::sqrt(norm);
  if (norm > fclass.weight_bound()) {
    const double scale = fclass.weight_bound() / norm;
    for (std::size_t i = 0; i < d; ++i) out[i] *= scale;
  }
  return out;
}

void validate_objective(const FunctionClass& fclass, const CriticObjective& obj) {
  if (!(obj.beta >= 0.0) || !std::isfinite(obj.beta))
    throw ArgumentError("critic objective: beta must be finite and >= 0");
  const std::size_t S = fclass.num_states();
  const std::size_t A = fclass.num_actions();
  if (obj.policy.num_states() != S || obj.policy.num_actions() != A)
    throw ArgumentError("critic objective: policy shape does not match the class");
  if (const auto* pop = std::get_if<PopulationSource>(&obj.source)) {
    const Mdp& mdp = population_mdp(*pop);
    if (mdp.num_states() != S || mdp.num_actions() != A)
      throw ArgumentError("critic objective: MDP shape does not match the class");
    require_shape(pop->mu.table(), S, A, "critic objective occupancy");
  } else {
    const Dataset& data = sample_data(std::get<SampleSource>(obj.source));
    if (data.num_states() != S || data.num_actions() != A)
      throw ArgumentError("critic objective: dataset shape does not match the class");
  }
}

ObjectiveValue evaluate_objective(const FunctionClass& fclass, const CriticObjective& obj,
                                  const StateActionTable& f) {
  validate_objective(fclass, obj);
  ObjectiveValue v;
  if (obj.mode == PessimismMode::Absolute)
    v.l_term = policy_value_at(f, obj.policy, start_state_of(obj.source));
  if (const auto* pop = std::get_if<PopulationSource>(&obj.source)) {
    const Mdp& mdp = population_mdp(*pop);
    if (obj.mode == PessimismMode::Relative)
      v.l_term = population_L(mdp, pop->mu, f, obj.policy).value;
    if (obj.beta > 0.0) v.e_term = population_E(mdp, pop->mu, f, obj.policy).value;
  } else {
    const Dataset& data = sample_data(std::get<SampleSource>(obj.source));
    if (obj.mode == PessimismMode::Relative) v.l_term = empirical_L(data, f, obj.policy).value;
    if (obj.beta > 0.0) v.e_term = empirical_E(data, f, obj.policy, fclass).value;
  }
  v.total = v.l_term + obj.beta * v.e_term;
  return v;
}

CriticSolution solve_critic(const FunctionClass& fclass, const CriticObjective& obj,
                            const SolveOptions& opt) {
  validate_objective(fclass, obj);
  CriticSolution sol;
  if (fclass.kind() == ClassKind::FiniteEnumeration) {
    const auto& members = fclass.members();
    for (std::size_t i = 0; i < members.size(); ++i) {
      const ObjectiveValue v = evaluate_objective(fclass, obj, members[i]);
      if (!sol.index || v.total < sol.objective.total) {
        sol.index = i;
        sol.objective = v;
      }
    }
    sol.f = members[*sol.index];
    return sol;
  }
  if (fclass.kind() == ClassKind::TabularBox && obj.mode == PessimismMode::Relative) {
    if (const auto* pop = std::get_if<PopulationSource>(&obj.source);
        pop && !pop->mu.full_support())
      throw UnidentifiedCritic(
          "box critic at population level needs a full-support behavior occupancy");
  }
  const Quadratic q = build_quadratic(fclass, obj);
  std::vector<double> start(q.n, 0.0);
  if (opt.initial.size() == q.n && all_finite(opt.initial)) start = opt.initial;
  if (obj.beta == 0.0) {
    sol.params = linear_minimizer(fclass, q, start);
    std::vector<double> grad(q.n);
    sol.gradient_norm = projected_gradient_norm(fclass, q, sol.params, 1.0, grad);
  } else {
    std::vector<double> scratch(q.n);
    start = project_member(fclass, start);
    if (auto newton = newton_point(q)) {
      auto candidate = project_member(fclass, *newton);
      if (q.value(candidate, scratch) < q.value(start, scratch)) start = std::move(candidate);
    }
    if (fclass.kind() == ClassKind::TabularBox) {
      auto polished = box_active_set(fclass, q, start, 4 * q.n + 8);
      if (q.value(polished, scratch) <= q.value(start, scratch)) start = std::move(polished);
    }
    QuadResult res = minimize_quadratic(fclass, q, std::move(start), opt);
    sol.params = std::move(res.p);
    sol.iterations = res.iterations;
    sol.gradient_norm = res.gradient_norm;
    sol.converged = res.converged;
  }
  sol.f = fclass.evaluate(sol.params);
  sol.objective = evaluate_objective(fclass, obj, sol.f);
  if (!std::isfinite(sol.objective.total))
    throw ComputationError("critic solve produced a non-finite objective");
  Rng rng(opt.probe_seed);
  const double slack = 1e-9 * (1.0 + std::abs(sol.objective.total));
  for (std::size_t i = 0; i < opt.probes; ++i) {
    const QTable probe = fclass.evaluate(random_feasible(fclass, rng, sol.params));
    if (evaluate_objective(fclass, obj, probe).total < sol.objective.total - slack) {
      sol.certified = false;
      break;
    }
  }
  return sol;
}

QTable critic_argmin(const FunctionClass& fclass, const CriticObjective& objective) {
  return solve_critic(fclass, objective).f;
}

AuditReport class_realizability_audit(const FunctionClass& fclass, const Mdp& mdp,
                                      const std::vector<TabularPolicy>& policies) {
  if (policies.empty()) throw EmptyAdmissibleSet("audit needs at least one policy");
  if (mdp.num_states() != fclass.num_states() || mdp.num_actions() != fclass.num_actions())
    throw ArgumentError("audit: MDP shape does not match the class");
  std::vector<Occupancy> nus;
  nus.reserve(policies.size());
  for (const auto& p : policies) nus.push_back(occupancy_measure(mdp, p));

  AuditReport report;
  report.admissible_count = nus.size();
  report.exact = fclass.kind() == ClassKind::FiniteEnumeration;
  auto worst = [&](const StateActionTable& f, const TabularPolicy& pi, std::vector<double>* per) {
    double w = 0.0;
    for (std::size_t i = 0; i < nus.size(); ++i) {
      const double e = population_E(mdp, nus[i], f, pi).value;
      if (per) (*per)[i] = e;
      w = std::max(w, e);
    }
    return w;
  };
  auto shared = std::make_shared<const Mdp>(mdp);
  for (const auto& pi : policies) {
    require_compatible(mdp, pi, "audit");
    double best = std::numeric_limits<double>::infinity();
    if (fclass.kind() == ClassKind::FiniteEnumeration) {
      for (const auto& f : fclass.members()) best = std::min(best, worst(f, pi, nullptr));
      report.values.push_back(best);
      continue;
    }
    // min_f max_ν by multiplicative weights over the listed occupancies, each
    // round solving the mixed-weight least-squares fit over the class.
    const std::size_t m = nus.size();
    std::vector<double> lambda(m, 1.0 / static_cast<double>(m));
    std::vector<double> per(m);
    const std::size_t rounds = m == 1 ? 1 : 200;
    std::vector<double> warm;
    for (std::size_t round = 0; round < rounds; ++round) {
      StateActionTable mix(mdp.num_states(), mdp.num_actions(), 0.0);
      for (std::size_t i = 0; i < m; ++i)
        kernels::axpby(lambda[i], nus[i].table().values(), 1.0, mix.values());
      double total = 0.0;
      for (double v : mix.values()) total += v;
      for (double& v : mix.values()) v /= total;
      CriticObjective fit{PessimismMode::Relative, 1.0, PopulationSource{shared, Occupancy(mix)},
                          pi};
      SolveOptions opt;
      opt.probes = 0;
      opt.initial = warm;
      // Drop the L term: fit only the Bellman residual.
      Quadratic q = build_quadratic(fclass, fit);
      const MatrixXd j = dense_jacobian(fclass);
      const VectorXd c = linear_coefficient(fit, mdp.num_states(), mdp.num_actions());
      const VectorXd jc = j.transpose() * c;
      for (std::size_t k = 0; k < q.n; ++k) q.g[k] -= jc(static_cast<Eigen::Index>(k));
      std::vector<double> start(q.n, 0.0);
      if (warm.size() == q.n) start = warm;
      if (auto newton = newton_point(q)) start = *newton;
      warm = minimize_quadratic(fclass, q, start, opt).p;
      const QTable f = fclass.evaluate(warm);
      const double w = worst(f, pi, &per);
      best = std::min(best, w);
      if (w <= 0.0) break;
      const double eta = std::sqrt(8.0 * std::log(static_cast<double>(m)) /
                                   static_cast<double>(rounds)) / w;
      double z = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        lambda[i] *= std::exp(eta * (per[i] - w));
        z += lambda[i];
      }
      for (double& l : lambda) l /= z;
    }
    report.values.push_back(best);
  }
  return report;
}

}  // namespace atac
