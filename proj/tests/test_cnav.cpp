#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "commentguard/cnav.hpp"
#include "commentguard/rng.hpp"

using namespace commentguard;
using namespace commentguard::cnav;

namespace {

using Mat = Matrix<double>;

Mat random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

struct Instance {
  Mat news;
  std::vector<Mat> comments;
  int label = 0;

  Example<double> example() const {
    Example<double> ex{std::cref(news), {}, label};
    for (const auto& c : comments) ex.comments.push_back(std::cref(c));
    return ex;
  }
  std::vector<SequenceRef<double>> refs() const {
    std::vector<SequenceRef<double>> r;
    for (const auto& c : comments) r.push_back(std::cref(c));
    return r;
  }
};

Instance random_instance(Rng& rng, const CnavConfig& cfg, std::size_t T) {
  Instance in;
  const auto d = static_cast<Eigen::Index>(cfg.d);
  in.news = random_matrix(rng, static_cast<Eigen::Index>(T), d);
  for (std::size_t j = 0; j < cfg.M; ++j) {
    in.comments.push_back(random_matrix(rng, static_cast<Eigen::Index>(1 + rng.index(T)), d));
  }
  in.label = static_cast<int>(rng.index(2));
  return in;
}

double example_loss(const CnavModel<double>& m, const Instance& in) {
  const auto refs = in.refs();
  return loss(forward<double>(m, in.news, refs), in.label);
}

/// Largest relative error between analytic and central-difference gradients.
/// Each difference is scaled by max(|numeric|, |analytic|, floor).
double max_gradient_error(CnavModel<double> m, const Instance& in, double h = 1e-4, double floor = 1e-6) {
  std::vector<double*> slots;
  m.for_each_param([&slots](const char*, auto& p) {
    for (Eigen::Index i = 0; i < p.size(); ++i) slots.push_back(p.data() + i);
  });
  // Flatten the gradient in the same storage order as `slots`.
  std::vector<double> analytic;
  const auto ex = in.example();
  const auto grad = backward<double>(m, std::span(&ex, 1)).grad;
  grad.for_each_param([&analytic](const char*, const auto& p) {
    for (Eigen::Index i = 0; i < p.size(); ++i) analytic.push_back(p.data()[i]);
  });
  double worst = 0.0;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const double orig = *slots[k];
    *slots[k] = orig + h;
    const double up = example_loss(m, in);
    *slots[k] = orig - h;
    const double down = example_loss(m, in);
    *slots[k] = orig;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), floor});
    worst = std::max(worst, std::abs(numeric - analytic[k]) / scale);
  }
  return worst;
}

}  // namespace

TEST(CnavConfig, Validation) {
  EXPECT_THROW((CnavConfig{1, 2, {}, 1}.validate()), PreconditionError);
  EXPECT_THROW((CnavConfig{4, 0, {}, 1}.validate()), PreconditionError);
  EXPECT_THROW((CnavConfig{6, 2, {}, 4}.validate()), PreconditionError);
  EXPECT_THROW((CnavConfig{4, 2, {0}, 1}.validate()), PreconditionError);
  EXPECT_NO_THROW((CnavConfig{6, 2, {5, 3}, 3}.validate()));
}

TEST(CnavModel, ShapesAndInitialization) {
  const CnavConfig cfg{8, 3, {}, 2};
  const auto m = CnavModel<double>::initialize(cfg, 1);
  EXPECT_EQ(m.w_agg.rows(), 8);
  EXPECT_EQ(m.w_agg.cols(), 32);
  EXPECT_EQ(m.mlp_weights.size(), 2u);
  EXPECT_EQ(m.mlp_weights[0].rows(), 8);
  EXPECT_EQ(m.mlp_weights[1].rows(), 1);
  EXPECT_LE(m.w_agg.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(32.0));
  EXPECT_LE(m.w_query.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(8.0));
  EXPECT_TRUE(m.b_agg.isZero());
  for (const auto& b : m.mlp_biases) EXPECT_TRUE(b.isZero());
  EXPECT_EQ(m.parameter_count(), 3u * 64 + 8 * 32 + 8 + 8 * 8 + 8 + 8 + 1);
  EXPECT_EQ(m, CnavModel<double>::initialize(cfg, 1));
  EXPECT_FALSE(m == CnavModel<double>::initialize(cfg, 2));
}

TEST(Forward, ZeroModelGivesOneHalf) {
  const CnavConfig cfg{2, 1, {}, 1};
  const auto m = CnavModel<double>::zeros(cfg);
  const Mat zero = Mat::Zero(1, 2);
  std::vector<SequenceRef<double>> c{std::cref(zero)};
  const auto p = forward<double>(m, zero, c);
  EXPECT_DOUBLE_EQ(p.probability, 0.5);
  EXPECT_DOUBLE_EQ(loss(p, 1), std::log(2.0));
}

TEST(Forward, ZeroQueryKeyMakesTokenOrderIrrelevant) {
  Rng rng(3);
  const CnavConfig cfg{4, 2, {}, 1};
  auto m = CnavModel<double>::initialize(cfg, 8);
  m.w_query.setZero();
  m.w_key.setZero();
  auto in = random_instance(rng, cfg, 5);
  in.comments[1] = random_matrix(rng, 4, 4);
  const auto before = forward_trace<double>(m, in.news, in.refs());
  in.comments[1].row(0).swap(in.comments[1].row(3));
  in.comments[1].row(1).swap(in.comments[1].row(2));
  const auto after = forward_trace<double>(m, in.news, in.refs());
  EXPECT_NEAR(before.prediction.probability, after.prediction.probability, 1e-14);
  EXPECT_TRUE(before.fused.isApprox(after.fused, 1e-13));
}

TEST(Forward, SwappingCommentBranchesChangesFusion) {
  Rng rng(4);
  const CnavConfig cfg{4, 2, {}, 1};
  const auto m = CnavModel<double>::initialize(cfg, 2);
  auto in = random_instance(rng, cfg, 3);
  const auto before = forward_trace<double>(m, in.news, in.refs());
  std::swap(in.comments[0], in.comments[1]);
  const auto after = forward_trace<double>(m, in.news, in.refs());
  EXPECT_GT((before.fused - after.fused).norm(), 1e-6);
  // H is the same multiset of branch vectors, just reordered.
  EXPECT_TRUE(before.concat.segment(4, 4).isApprox(after.concat.segment(8, 4)));
}

TEST(Forward, ProbabilityStaysInsideEpsilonBand) {
  Rng rng(5);
  const CnavConfig cfg{4, 2, {}, 1};
  auto m = CnavModel<double>::initialize(cfg, 1);
  const auto in = random_instance(rng, cfg, 3);
  for (double bias : {-1e6, -40.0, 0.0, 40.0, 1e6}) {
    m.mlp_biases.back()(0) = bias;
    const auto p = forward<double>(m, in.news, in.refs());
    EXPECT_GE(p.probability, kProbEpsilon);
    EXPECT_LE(p.probability, 1.0 - kProbEpsilon);
    EXPECT_NEAR(p.probability, sigmoid(p.logit), 1e-9);
  }
}

TEST(Forward, InputErrors) {
  Rng rng(6);
  const CnavConfig cfg{4, 2, {}, 1};
  const auto m = CnavModel<double>::initialize(cfg, 1);
  auto in = random_instance(rng, cfg, 3);
  auto refs = in.refs();
  const Mat wrong = Mat::Zero(2, 3);
  EXPECT_THROW(forward<double>(m, wrong, refs), PreconditionError);
  std::vector<SequenceRef<double>> one{refs[0]};
  EXPECT_THROW(forward<double>(m, in.news, one), PreconditionError);
  in.comments[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward<double>(m, in.news, in.refs()), PreconditionError);
  const Mat empty(0, 4);
  EXPECT_THROW(forward<double>(m, empty, refs), PreconditionError);
}

TEST(Forward, ExtraCommentsAreIgnored) {
  Rng rng(7);
  const CnavConfig cfg{4, 2, {}, 1};
  const auto m = CnavModel<double>::initialize(cfg, 1);
  const auto in = random_instance(rng, cfg, 3);
  auto refs = in.refs();
  const auto base = forward<double>(m, in.news, refs);
  const Mat extra = random_matrix(rng, 2, 4);
  refs.push_back(std::cref(extra));
  EXPECT_EQ(forward<double>(m, in.news, refs).probability, base.probability);
}

TEST(Loss, ArithmeticValues) {
  EXPECT_NEAR(loss(Prediction<double>{0.5, 0.0}, 1), 0.693147, 1e-6);
  EXPECT_NEAR(loss(Prediction<double>{0.9, 0.0}, 0), 2.302585, 1e-6);
  EXPECT_NEAR(loss(Prediction<double>{1.0, 50.0}, 1), -std::log(1 - kProbEpsilon), 1e-15);
  EXPECT_NEAR(loss(Prediction<double>{0.0, -50.0}, 1), -std::log(kProbEpsilon), 1e-9);
}

TEST(Shapes, FusionContractAcrossRandomConfigs) {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    CnavConfig cfg;
    const std::size_t heads = 1 + rng.index(3);
    cfg.d = heads * (2 + rng.index(4));
    cfg.attention_heads = heads;
    cfg.M = 1 + rng.index(10);
    if (rng.index(2) == 1) cfg.mlp_hidden = {1 + rng.index(6), 1 + rng.index(6)};
    const auto m = CnavModel<double>::initialize(cfg, rng.next());
    EXPECT_EQ(m.w_agg.rows(), static_cast<Eigen::Index>(cfg.d));
    EXPECT_EQ(m.w_agg.cols(), static_cast<Eigen::Index>((cfg.M + 1) * cfg.d));
    const auto in = random_instance(rng, cfg, 1 + rng.index(6));
    const auto tr = forward_trace<double>(m, in.news, in.refs());
    EXPECT_EQ(tr.concat.size(), static_cast<Eigen::Index>((cfg.M + 1) * cfg.d));
    EXPECT_EQ(tr.fused.size(), static_cast<Eigen::Index>(cfg.d));
    EXPECT_EQ(tr.branches.size(), cfg.M + 1);
    for (const auto& b : tr.branches) {
      for (const auto& a : b.attention) {
        EXPECT_TRUE(a.rowwise().sum().isApproxToConstant(1.0, 1e-12));
      }
    }
  }
}

TEST(Backward, MatchesCentralDifferencesOnSmallModels) {
  const CnavConfig cfg{4, 2, {}, 1};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, "fd"));
    const auto m = CnavModel<double>::initialize(cfg, seed);
    const auto in = random_instance(rng, cfg, 3);
    EXPECT_LT(max_gradient_error(m, in), 1e-3) << "seed " << seed;
  }
}

TEST(Backward, MatchesCentralDifferencesWithHeadsAndDeepMlp) {
  const CnavConfig cfg{6, 3, {5, 4}, 3};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(seed, "fd-deep"));
    auto m = CnavModel<double>::initialize(cfg, seed);
    // Larger attention weights make the softmax far from uniform.
    m.w_query *= 3.0;
    m.w_key *= 3.0;
    const auto in = random_instance(rng, cfg, 4);
    EXPECT_LT(max_gradient_error(m, in), 1e-3) << "seed " << seed;
  }
}

TEST(Backward, ClampedRegionHasZeroGradient) {
  Rng rng(12);
  const CnavConfig cfg{4, 2, {}, 1};
  auto m = CnavModel<double>::initialize(cfg, 1);
  m.mlp_biases.back()(0) = 100.0;
  auto in = random_instance(rng, cfg, 3);
  in.label = 1;
  const auto ex = in.example();
  const auto g = backward<double>(m, std::span(&ex, 1)).grad.collect();
  double norm = 0;
  for (double v : g) norm += v * v;
  EXPECT_LT(std::sqrt(norm), 1e-5);
}

TEST(Backward, DuplicatedBatchGivesSameMeanAndWorkersDoNotMatter) {
  Rng rng(13);
  const CnavConfig cfg{4, 3, {}, 2};
  const auto m = CnavModel<double>::initialize(cfg, 4);
  std::vector<Instance> inst;
  for (int i = 0; i < 5; ++i) inst.push_back(random_instance(rng, cfg, 4));
  std::vector<Example<double>> batch, doubled;
  for (const auto& in : inst) batch.push_back(in.example());
  for (int rep = 0; rep < 2; ++rep) {
    for (const auto& in : inst) doubled.push_back(in.example());
  }
  const auto a = backward<double>(m, batch, 1);
  const auto b = backward<double>(m, doubled, 1);
  const auto c = backward<double>(m, batch, 4);
  const auto ga = a.grad.collect(), gb = b.grad.collect(), gc = c.grad.collect();
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(ga[i], gb[i], 1e-13);
  EXPECT_EQ(ga, gc);
  EXPECT_EQ(a.mean_loss, c.mean_loss);
  EXPECT_NEAR(a.mean_loss, b.mean_loss, 1e-14);
  EXPECT_EQ(2 * a.correct, b.correct);
  EXPECT_THROW(backward<double>(m, std::span<const Example<double>>{}), PreconditionError);
}

TEST(Adam, ZeroGradientAndZeroLrLeaveModelUnchanged) {
  const CnavConfig cfg{4, 2, {}, 1};
  const auto m0 = CnavModel<double>::initialize(cfg, 3);
  auto m = m0;
  auto st = AdamState<double>::for_model(m);
  adam_step(m, CnavModel<double>::zeros(cfg), st, 0.01);
  EXPECT_EQ(m, m0);
  auto g = CnavModel<double>::initialize(cfg, 99);
  adam_step(m, g, st, 0.0);
  EXPECT_EQ(m, m0);
  EXPECT_EQ(st.step, 2u);
}

TEST(Adam, ConstantGradientStepApproachesLrTimesSign) {
  const CnavConfig cfg{2, 1, {}, 1};
  auto m = CnavModel<double>::zeros(cfg);
  auto g = CnavModel<double>::zeros(cfg);
  g.b_agg << 0.37, -2.5;
  auto st = AdamState<double>::for_model(m);
  const double lr = 0.01;
  Vector<double> prev = m.b_agg;
  for (int t = 0; t < 500; ++t) {
    prev = m.b_agg;
    adam_step(m, g, st, lr);
  }
  const Vector<double> step = m.b_agg - prev;
  EXPECT_NEAR(step(0), -lr, 1e-8);
  EXPECT_NEAR(step(1), lr, 1e-8);
  EXPECT_TRUE(m.w_agg.isZero());
}

TEST(Adam, LossDecreasesOnSeparableBatch) {
  Rng rng(21);
  const CnavConfig cfg{4, 2, {}, 1};
  auto m = CnavModel<double>::initialize(cfg, 5);
  // Label is carried by the sign of the first news feature.
  std::vector<Instance> inst;
  for (int i = 0; i < 16; ++i) {
    auto in = random_instance(rng, cfg, 3);
    in.label = i % 2;
    in.news.col(0).setConstant(in.label == 1 ? 1.0 : -1.0);
    inst.push_back(std::move(in));
  }
  std::vector<Example<double>> batch;
  for (const auto& in : inst) batch.push_back(in.example());
  auto st = AdamState<double>::for_model(m);
  double first = 0, prev = std::numeric_limits<double>::infinity();
  int non_improving = 0;
  for (int step = 0; step < 200; ++step) {
    const auto r = backward<double>(m, batch);
    if (step == 0) first = r.mean_loss;
    if (r.mean_loss >= prev) ++non_improving;
    prev = r.mean_loss;
    adam_step(m, r.grad, st, 0.01);
  }
  EXPECT_LE(non_improving, 5);
  EXPECT_LT(prev, 0.5 * first);
  EXPECT_TRUE(m.all_finite());
}

TEST(CnavModel, CastRoundTrip) {
  const CnavConfig cfg{4, 2, {3}, 2};
  const auto m = CnavModel<double>::initialize(cfg, 7);
  const auto f = m.cast<float>();
  EXPECT_EQ(f.parameter_count(), m.parameter_count());
  EXPECT_EQ(f.cast<double>().cast<float>(), f);
}
