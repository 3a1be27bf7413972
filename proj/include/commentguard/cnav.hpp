#pragma once

// Comment/news fusion classifier.
//
// Every text (the news and each of the M comments) goes through the same
// single-layer multi-head self-attention branch and is mean-pooled to one
// d-vector. The M+1 branch vectors are concatenated (news first), projected
// back to d by W_agg, and scored by a tanh MLP with a scalar sigmoid output.
//
// Parameters and gradients share one type, CnavModel<Scalar>, so optimizer
// state, finite-difference checks and serialization all walk the same
// parameter list via for_each_param().

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "commentguard/parallel.hpp"
#include "commentguard/rng.hpp"
#include "commentguard/types.hpp"

namespace commentguard::cnav {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kProbEpsilon = 1e-7;

struct CnavConfig {
  std::size_t d = 32;
  std::size_t M = 6;
  std::vector<std::size_t> mlp_hidden;  // empty -> one hidden layer of width d
  std::size_t attention_heads = 1;

  std::vector<std::size_t> hidden_widths() const { return mlp_hidden.empty() ? std::vector<std::size_t>{d} : mlp_hidden; }

  void validate() const {
    if (d < 2) throw PreconditionError("cnav config: d must be at least 2");
    if (M < 1) throw PreconditionError("cnav config: M must be at least 1");
    if (attention_heads == 0 || d % attention_heads != 0) {
      throw PreconditionError("cnav config: attention_heads must divide d");
    }
    for (auto w : mlp_hidden) {
      if (w == 0) throw PreconditionError("cnav config: MLP widths must be positive");
    }
  }

  bool operator==(const CnavConfig& o) const {
    return d == o.d && M == o.M && attention_heads == o.attention_heads && hidden_widths() == o.hidden_widths();
  }
};

template <typename Scalar>
struct CnavModel {
  CnavConfig config;
  // Branch self-attention, shared by all M+1 branches. Applied as X * W.
  Matrix<Scalar> w_query, w_key, w_value;
  Matrix<Scalar> w_agg;  // d x (M+1)d
  Vector<Scalar> b_agg;  // d
  std::vector<Matrix<Scalar>> mlp_weights;  // out x in; last layer has one row
  std::vector<Vector<Scalar>> mlp_biases;

  /// All parameters zero, shaped for `cfg`.
  static CnavModel zeros(const CnavConfig& cfg) {
    cfg.validate();
    const auto d = static_cast<Eigen::Index>(cfg.d);
    const auto M = static_cast<Eigen::Index>(cfg.M);
    CnavModel m;
    m.config = cfg;
    m.w_query = Matrix<Scalar>::Zero(d, d);
    m.w_key = Matrix<Scalar>::Zero(d, d);
    m.w_value = Matrix<Scalar>::Zero(d, d);
    m.w_agg = Matrix<Scalar>::Zero(d, (M + 1) * d);
    m.b_agg = Vector<Scalar>::Zero(d);
    Eigen::Index in = d;
    for (auto w : cfg.hidden_widths()) {
      m.mlp_weights.push_back(Matrix<Scalar>::Zero(static_cast<Eigen::Index>(w), in));
      m.mlp_biases.push_back(Vector<Scalar>::Zero(static_cast<Eigen::Index>(w)));
      in = static_cast<Eigen::Index>(w);
    }
    m.mlp_weights.push_back(Matrix<Scalar>::Zero(1, in));
    m.mlp_biases.push_back(Vector<Scalar>::Zero(1));
    return m;
  }

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  static CnavModel initialize(const CnavConfig& cfg, std::uint64_t seed) {
    CnavModel m = zeros(cfg);
    Rng rng(derive_seed(seed, "cnav-init"));
    auto fill = [&rng](Matrix<Scalar>& w, Eigen::Index fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
    };
    fill(m.w_query, m.w_query.rows());
    fill(m.w_key, m.w_key.rows());
    fill(m.w_value, m.w_value.rows());
    fill(m.w_agg, m.w_agg.cols());
    for (auto& w : m.mlp_weights) fill(w, w.cols());
    return m;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_param([&n](const char*, const auto& p) { n += static_cast<std::size_t>(p.size()); });
    return n;
  }

  /// Visits (name, parameter) in declaration order.
  template <typename F>
  void for_each_param(F&& f) {
    f("w_query", w_query);
    f("w_key", w_key);
    f("w_value", w_value);
    f("w_agg", w_agg);
    f("b_agg", b_agg);
    for (std::size_t l = 0; l < mlp_weights.size(); ++l) {
      f("mlp_weight", mlp_weights[l]);
      f("mlp_bias", mlp_biases[l]);
    }
  }
  template <typename F>
  void for_each_param(F&& f) const {
    const_cast<CnavModel*>(this)->for_each_param(
        [&f](const char* name, const auto& p) { f(name, p); });
  }

  bool all_finite() const {
    bool ok = true;
    for_each_param([&ok](const char*, const auto& p) { ok = ok && p.allFinite(); });
    return ok;
  }

  template <typename Other>
  CnavModel<Other> cast() const {
    CnavModel<Other> out;
    out.config = config;
    out.w_query = w_query.template cast<Other>();
    out.w_key = w_key.template cast<Other>();
    out.w_value = w_value.template cast<Other>();
    out.w_agg = w_agg.template cast<Other>();
    out.b_agg = b_agg.template cast<Other>();
    for (const auto& w : mlp_weights) out.mlp_weights.push_back(w.template cast<Other>());
    for (const auto& b : mlp_biases) out.mlp_biases.push_back(b.template cast<Other>());
    return out;
  }

  bool operator==(const CnavModel& o) const {
    if (!(config == o.config)) return false;
    bool eq = true;
    auto lhs = collect();
    auto rhs = o.collect();
    if (lhs.size() != rhs.size()) return false;
    for (std::size_t i = 0; i < lhs.size() && eq; ++i) eq = lhs[i] == rhs[i];
    return eq;
  }

  /// Flattened parameters, declaration order, each array row-major.
  std::vector<Scalar> collect() const {
    std::vector<Scalar> flat;
    flat.reserve(parameter_count());
    for_each_param([&flat](const char*, const auto& p) {
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.cols(); ++c) flat.push_back(p(r, c));
      }
    });
    return flat;
  }
};

/// Applies f(a, b, ...) to matching parameters of several same-shaped models.
template <typename F, typename First, typename... Rest>
void zip_params(F&& f, First& first, Rest&... rest) {
  f(first.w_query, rest.w_query...);
  f(first.w_key, rest.w_key...);
  f(first.w_value, rest.w_value...);
  f(first.w_agg, rest.w_agg...);
  f(first.b_agg, rest.b_agg...);
  for (std::size_t l = 0; l < first.mlp_weights.size(); ++l) {
    f(first.mlp_weights[l], rest.mlp_weights[l]...);
    f(first.mlp_biases[l], rest.mlp_biases[l]...);
  }
}

template <typename Scalar>
struct Prediction {
  Scalar probability{};
  Scalar logit{};
};

template <typename Scalar>
using SequenceRef = std::reference_wrapper<const Matrix<Scalar>>;

/// Intermediate values of one branch, kept for the backward pass.
template <typename Scalar>
struct BranchTrace {
  const Matrix<Scalar>* input = nullptr;
  Matrix<Scalar> query, key, value;
  std::vector<Matrix<Scalar>> attention;  // per head, T x T, rows sum to 1
  Vector<Scalar> pooled;                  // d
};

template <typename Scalar>
struct ForwardTrace {
  std::vector<BranchTrace<Scalar>> branches;  // news, then comments
  Vector<Scalar> concat;                      // H, length (M+1)d
  Vector<Scalar> fused;                       // z, length d
  std::vector<Vector<Scalar>> activations;    // MLP inputs per layer
  Scalar raw_logit{};
  Prediction<Scalar> prediction;
};

/// |logit| bound such that sigmoid stays within [eps, 1 - eps].
template <typename Scalar>
Scalar logit_bound() {
  return static_cast<Scalar>(std::log((1.0 - kProbEpsilon) / kProbEpsilon));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x)) : std::exp(x) / (Scalar(1) + std::exp(x));
}

namespace detail {

template <typename Scalar>
void softmax_rows(Matrix<Scalar>& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Scalar mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

template <typename Scalar>
BranchTrace<Scalar> branch_forward(const CnavModel<Scalar>& m, const Matrix<Scalar>& x) {
  const auto heads = static_cast<Eigen::Index>(m.config.attention_heads);
  const auto dh = static_cast<Eigen::Index>(m.config.d) / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  BranchTrace<Scalar> b;
  b.input = &x;
  b.query = x * m.w_query;
  b.key = x * m.w_key;
  b.value = x * m.w_value;
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index h = 0; h < heads; ++h) {
    Matrix<Scalar> a = b.query.middleCols(h * dh, dh) * b.key.middleCols(h * dh, dh).transpose() * scale;
    softmax_rows(a);
    out.middleCols(h * dh, dh).noalias() = a * b.value.middleCols(h * dh, dh);
    b.attention.push_back(std::move(a));
  }
  b.pooled = out.colwise().mean().transpose();
  return b;
}

/// Accumulates parameter gradients for one branch given dL/dpooled.
template <typename Scalar>
void branch_backward(const CnavModel<Scalar>& m, const BranchTrace<Scalar>& b, const Vector<Scalar>& d_pooled,
                     CnavModel<Scalar>& grad) {
  const auto heads = static_cast<Eigen::Index>(m.config.attention_heads);
  const auto dh = static_cast<Eigen::Index>(m.config.d) / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const auto& x = *b.input;
  const Eigen::Index T = x.rows();
  // Mean pooling spreads d_pooled / T over every row of the attention output.
  const Matrix<Scalar> d_out = Vector<Scalar>::Constant(T, Scalar(1) / static_cast<Scalar>(T)) * d_pooled.transpose();
  Matrix<Scalar> d_query(T, x.cols()), d_key(T, x.cols()), d_value(T, x.cols());
  for (Eigen::Index h = 0; h < heads; ++h) {
    const auto& a = b.attention[static_cast<std::size_t>(h)];
    const auto d_out_h = d_out.middleCols(h * dh, dh);
    d_value.middleCols(h * dh, dh).noalias() = a.transpose() * d_out_h;
    const Matrix<Scalar> d_a = d_out_h * b.value.middleCols(h * dh, dh).transpose();
    const Vector<Scalar> row_dot = (d_a.array() * a.array()).rowwise().sum();
    const Matrix<Scalar> d_s = (a.array() * (d_a.colwise() - row_dot).array()).matrix();
    d_query.middleCols(h * dh, dh).noalias() = d_s * b.key.middleCols(h * dh, dh) * scale;
    d_key.middleCols(h * dh, dh).noalias() = d_s.transpose() * b.query.middleCols(h * dh, dh) * scale;
  }
  grad.w_query.noalias() += x.transpose() * d_query;
  grad.w_key.noalias() += x.transpose() * d_key;
  grad.w_value.noalias() += x.transpose() * d_value;
}

template <typename Scalar>
void check_input(const Matrix<Scalar>& x, std::size_t d, const char* what) {
  if (x.rows() < 1) throw PreconditionError(std::string("cnav: empty ") + what + " sequence");
  if (x.cols() != static_cast<Eigen::Index>(d)) {
    throw PreconditionError(std::string("cnav: ") + what + " width " + std::to_string(x.cols()) +
                            " does not match d = " + std::to_string(d));
  }
  if (!x.allFinite()) throw PreconditionError(std::string("cnav: non-finite value in ") + what + " sequence");
}

}  // namespace detail

/// Full forward pass with intermediates. Uses the first M comments; fewer
/// than M is a PreconditionError.
template <typename Scalar>
ForwardTrace<Scalar> forward_trace(const CnavModel<Scalar>& m, const Matrix<Scalar>& news,
                                   std::span<const SequenceRef<Scalar>> comments) {
  const auto& cfg = m.config;
  const auto d = static_cast<Eigen::Index>(cfg.d);
  if (comments.size() < cfg.M) {
    throw PreconditionError("cnav: expected " + std::to_string(cfg.M) + " comments, got " +
                            std::to_string(comments.size()));
  }
  detail::check_input(news, cfg.d, "news");
  for (std::size_t j = 0; j < cfg.M; ++j) detail::check_input(comments[j].get(), cfg.d, "comment");

  ForwardTrace<Scalar> tr;
  tr.branches.reserve(cfg.M + 1);
  tr.branches.push_back(detail::branch_forward(m, news));
  for (std::size_t j = 0; j < cfg.M; ++j) tr.branches.push_back(detail::branch_forward(m, comments[j].get()));

  tr.concat.resize(static_cast<Eigen::Index>(cfg.M + 1) * d);
  for (std::size_t b = 0; b < tr.branches.size(); ++b) {
    tr.concat.segment(static_cast<Eigen::Index>(b) * d, d) = tr.branches[b].pooled;
  }
  tr.fused = m.w_agg * tr.concat + m.b_agg;
  if (tr.concat.size() != static_cast<Eigen::Index>(cfg.M + 1) * d || tr.fused.size() != d) {
    throw std::logic_error("cnav: fusion shape contract violated");
  }

  Vector<Scalar> a = tr.fused;
  const std::size_t layers = m.mlp_weights.size();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    tr.activations.push_back(a);
    a = (m.mlp_weights[l] * a + m.mlp_biases[l]).array().tanh().matrix();
  }
  tr.activations.push_back(a);
  tr.raw_logit = (m.mlp_weights.back() * a + m.mlp_biases.back())(0);
  const Scalar bound = logit_bound<Scalar>();
  tr.prediction.logit = std::clamp(tr.raw_logit, -bound, bound);
  // sigmoid(+-bound) can round just outside [eps, 1 - eps]
  const Scalar eps = static_cast<Scalar>(kProbEpsilon);
  tr.prediction.probability = std::clamp(sigmoid(tr.prediction.logit), eps, Scalar(1) - eps);
  return tr;
}

template <typename Scalar>
Prediction<Scalar> forward(const CnavModel<Scalar>& m, const Matrix<Scalar>& news,
                           std::span<const SequenceRef<Scalar>> comments) {
  return forward_trace(m, news, comments).prediction;
}

/// Binary cross-entropy with the probability clamped to [eps, 1 - eps].
template <typename Scalar>
Scalar loss(const Prediction<Scalar>& pred, int label) {
  const Scalar eps = static_cast<Scalar>(kProbEpsilon);
  const Scalar p = std::clamp(pred.probability, eps, Scalar(1) - eps);
  return label == 1 ? -std::log(p) : -std::log(Scalar(1) - p);
}

/// One labelled example: encoded news plus its ordered comment sequences.
template <typename Scalar>
struct Example {
  SequenceRef<Scalar> news;
  std::vector<SequenceRef<Scalar>> comments;
  int label = 0;
};

/// Adds dLoss/dparams of one traced example into `grad`.
template <typename Scalar>
void accumulate_gradient(const CnavModel<Scalar>& m, const ForwardTrace<Scalar>& tr, int label,
                         CnavModel<Scalar>& grad) {
  const Scalar bound = logit_bound<Scalar>();
  if (std::abs(tr.raw_logit) >= bound) return;  // clamped region: loss is flat
  const Scalar d_logit = tr.prediction.probability - static_cast<Scalar>(label);

  const std::size_t layers = m.mlp_weights.size();
  Vector<Scalar> delta = Vector<Scalar>::Constant(1, d_logit);
  for (std::size_t l = layers; l-- > 0;) {
    const auto& input = tr.activations[l];
    grad.mlp_weights[l].noalias() += delta * input.transpose();
    grad.mlp_biases[l] += delta;
    Vector<Scalar> d_input = m.mlp_weights[l].transpose() * delta;
    if (l > 0) {
      // input = tanh(pre) for every layer after the first.
      d_input.array() *= (Scalar(1) - input.array().square());
    }
    delta = std::move(d_input);
  }
  const Vector<Scalar>& d_fused = delta;
  grad.w_agg.noalias() += d_fused * tr.concat.transpose();
  grad.b_agg += d_fused;
  const Vector<Scalar> d_concat = m.w_agg.transpose() * d_fused;
  const auto d = static_cast<Eigen::Index>(m.config.d);
  for (std::size_t b = 0; b < tr.branches.size(); ++b) {
    detail::branch_backward<Scalar>(m, tr.branches[b], d_concat.segment(static_cast<Eigen::Index>(b) * d, d), grad);
  }
}

template <typename Scalar>
struct GradientResult {
  CnavModel<Scalar> grad;  // mean over the batch
  Scalar mean_loss{};
  std::size_t correct = 0;  // threshold 0.5, ties -> real
};

/// Mean-over-batch gradients. Per-example work may run on several workers;
/// the reduction is a fixed-order sum, so results do not depend on `workers`.
template <typename Scalar>
GradientResult<Scalar> backward(const CnavModel<Scalar>& m, std::span<const Example<Scalar>> batch,
                                std::size_t workers = 1) {
  if (batch.empty()) throw PreconditionError("cnav backward: empty batch");
  std::vector<CnavModel<Scalar>> per(batch.size());
  std::vector<Scalar> losses(batch.size());
  std::vector<char> hit(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    const auto& ex = batch[i];
    auto tr = forward_trace<Scalar>(m, ex.news.get(), ex.comments);
    per[i] = CnavModel<Scalar>::zeros(m.config);
    accumulate_gradient(m, tr, ex.label, per[i]);
    losses[i] = loss(tr.prediction, ex.label);
    hit[i] = (tr.prediction.probability > Scalar(0.5) ? 1 : 0) == ex.label;
  });
  GradientResult<Scalar> out;
  out.grad = CnavModel<Scalar>::zeros(m.config);
  Scalar total{};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    zip_params([](auto& acc, const auto& g) { acc += g; }, out.grad, per[i]);
    total += losses[i];
    out.correct += static_cast<std::size_t>(hit[i]);
  }
  const Scalar inv = Scalar(1) / static_cast<Scalar>(batch.size());
  zip_params([inv](auto& acc) { acc *= inv; }, out.grad);
  out.mean_loss = total * inv;
  return out;
}

template <typename Scalar>
struct AdamState {
  CnavModel<Scalar> first_moment;
  CnavModel<Scalar> second_moment;
  std::uint64_t step = 0;

  static AdamState for_model(const CnavModel<Scalar>& m) {
    return AdamState{CnavModel<Scalar>::zeros(m.config), CnavModel<Scalar>::zeros(m.config), 0};
  }
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update, in place.
template <typename Scalar>
void adam_step(CnavModel<Scalar>& m, const CnavModel<Scalar>& grad, AdamState<Scalar>& state, double lr,
               const AdamHyper& hp = {}) {
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const Scalar b1 = static_cast<Scalar>(hp.beta1), b2 = static_cast<Scalar>(hp.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(hp.beta1, t));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(hp.beta2, t));
  const Scalar step = static_cast<Scalar>(lr), eps = static_cast<Scalar>(hp.epsilon);
  zip_params(
      [&](auto& p, const auto& g, auto& m1, auto& m2) {
        m1 = b1 * m1 + (Scalar(1) - b1) * g;
        m2 = b2 * m2 + (Scalar(1) - b2) * g.cwiseProduct(g);
        p.array() -= step * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      },
      m, grad, state.first_moment, state.second_moment);
}

}  // namespace commentguard::cnav
