// Copyright 2026 The OrthoCare Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "orthocare/error.hpp"
#include "orthocare/gradcheck.hpp"
#include "orthocare/optim.hpp"
#include "orthocare/ortho.hpp"
#include "orthocare/sae.hpp"
#include "test_util.hpp"

namespace orthocare {
namespace {

using testing::naive_matmul;
using testing::naive_transpose;
using testing::random_tensor;

// Oracle: ||W a||^2 with W a computed by explicit loops.
double norm_of_wa_sq(const Tensor& w, const Tensor& a) {
  double s = 0.0;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double x = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) x += w.at(r, c) * a[c];
    s += x * x;
  }
  return s;
}

double oracle_inner(const Tensor& a, const Tensor& b, const Tensor& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) s += a[i] * m.at(i, j) * b[j];
  return s;
}

TEST(Sae, EncodeExamples) {
  const Tensor w = Tensor::matrix({{1, 0}, {0, -1}});
  EXPECT_EQ(sae_encode(w, Tensor::vector({2, 3})), Tensor::vector({2, 0}));
  EXPECT_EQ(sae_encode(w, Tensor::vector({0, 0})), Tensor::vector({0, 0}));
  std::mt19937_64 gen(1);
  for (int t = 0; t < 1000; ++t) {
    const auto s = sae_encode(random_tensor(gen, {6, 3}), random_tensor(gen, {3}));
    for (double x : s.data()) ASSERT_GE(x, 0.0);
  }
  EXPECT_THROW(sae_encode(w, Tensor::vector({1, 2, 3})), ShapeError);
}

TEST(Sae, DecodeExamples) {
  std::mt19937_64 gen(2);
  const Tensor w = random_tensor(gen, {8, 4});
  EXPECT_EQ(sae_decode(w, Tensor({8})), Tensor({4}));
  const Tensor s = random_tensor(gen, {8}, 0, 1);
  const Tensor expect = naive_matmul(naive_transpose(w), s.reshaped({8, 1}));
  const Tensor got = sae_decode(w, s);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
  EXPECT_THROW(sae_decode(w, Tensor({4})), ShapeError);
}

TEST(Sae, OrthonormalRowsReconstructTheirSpan) {
  // Rows e1, e2 of R^3 rotated by an orthogonal matrix.
  const double c = std::cos(0.4), s = std::sin(0.4);
  const Tensor w = Tensor::matrix({{c, s, 0}, {-s, c, 0}});
  const Tensor v = Tensor::vector({2 * c - 0.5 * s, 2 * s + 0.5 * c, 0});  // 2 r1 + 0.5 r2
  const Tensor code = sae_encode(w, v);
  EXPECT_NEAR(code[0], 2.0, 1e-12);
  EXPECT_NEAR(code[1], 0.5, 1e-12);
  const Tensor back = sae_decode(w, code);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(back[i], v[i], 1e-12);
}

TEST(Metric, IdentityAndQuadraticFormIdentity) {
  EXPECT_EQ(metric(Tensor::identity(3)), Tensor::identity(3));
  std::mt19937_64 gen(3);
  for (int t = 0; t < 100; ++t) {
    const Tensor w = random_tensor(gen, {16, 8});
    const Tensor a = random_tensor(gen, {8});
    const Tensor m = metric(w);
    const double expect = norm_of_wa_sq(w, a);
    EXPECT_NEAR(m_norm_sq(a, m), expect, 1e-12 * std::max(1.0, expect));
    EXPECT_NEAR(oracle_inner(a, a, m), expect, 1e-12 * std::max(1.0, expect));
    EXPECT_LT(asymmetry(m), 1e-12);
  }
}

TEST(Metric, RankDeficientStaysPsd) {
  std::mt19937_64 gen(4);
  Tensor w = random_tensor(gen, {3, 6});  // rank 3 < 6
  Tensor padded({4, 6});
  for (std::size_t i = 0; i < w.size(); ++i) padded[i] = w[i];
  const Tensor m = metric(padded);
  // Oracle eigenvalues from an independent solver on the explicit matrix.
  Eigen::MatrixXd e(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) e(i, j) = m.at(i, j);
  const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e).eigenvalues().minCoeff();
  EXPECT_GE(lo, -1e-8);
  EXPECT_NEAR(min_eigenvalue(m), lo, 1e-10);
}

TEST(Metric, InnerProductProperties) {
  std::mt19937_64 gen(5);
  const Tensor m = metric(random_tensor(gen, {10, 5}));
  for (int t = 0; t < 50; ++t) {
    const Tensor a = random_tensor(gen, {5});
    const Tensor b = random_tensor(gen, {5});
    double dot = 0.0;
    for (std::size_t i = 0; i < 5; ++i) dot += a[i] * b[i];
    EXPECT_NEAR(m_inner(a, b, Tensor::identity(5)), dot, 1e-12);
    EXPECT_NEAR(m_inner(a, b, m), m_inner(b, a, m), 1e-12);
    EXPECT_GE(m_norm_sq(a, m), -1e-12);
  }
  EXPECT_THROW(m_inner(Tensor({4}), Tensor({5}), m), ShapeError);
}

TEST(Metric, NullSpaceCharacterization) {
  std::mt19937_64 gen(6);
  for (int t = 0; t < 20; ++t) {
    const Tensor w = random_tensor(gen, {3, 5});
    // Null-space basis of W from a full SVD computed independently.
    Eigen::MatrixXd e(3, 5);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 5; ++j) e(i, j) = w.at(i, j);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeFullV);
    const Eigen::VectorXd null = svd.matrixV().col(4) + 0.5 * svd.matrixV().col(3);
    Tensor a({5});
    for (int i = 0; i < 5; ++i) a[i] = null(i);
    EXPECT_LT(std::abs(m_norm_sq(a, metric(w))), 1e-10);
    EXPECT_LT(norm_of_wa_sq(w, a), 1e-10);
    const Tensor b = random_tensor(gen, {5});
    EXPECT_GT(m_norm_sq(b, metric(w)), 1e-10);
  }
}

TEST(ReconLoss, ZeroCases) {
  Rng rng(7);
  Sae sae(3, 2, rng);
  ad::Graph g;
  ReconOptions opts;
  opts.gamma = 0.5;
  EXPECT_EQ(recon_loss(g, sae, g.constant(Tensor({2, 3})), opts).total.value().item(), 0.0);

  const double c = std::cos(0.3), s = std::sin(0.3);
  sae.weight.value = Tensor::matrix({{c, s, 0}, {-s, c, 0}});
  const Tensor v = Tensor::matrix({{c, s, 0}});  // row 1 of W: perfectly reconstructed
  opts.gamma = 0.0;
  EXPECT_NEAR(recon_loss(g, sae, g.constant(v), opts).total.value().item(), 0.0, 1e-24);
}

TEST(ReconLoss, MatchesDirectFormula) {
  std::mt19937_64 gen(8);
  Rng rng(8);
  Sae sae(4, 8, rng);
  const Tensor v = random_tensor(gen, {3, 4});
  ad::Graph g;
  ReconOptions opts;
  opts.gamma = 0.2;
  const double got = recon_loss(g, sae, g.constant(v), opts).total.value().item();
  const Tensor& w = sae.weight.value;
  const Tensor m = metric(w);
  double expect = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    Tensor vr({4});
    for (std::size_t k = 0; k < 4; ++k) vr[k] = v.at(r, k);
    const Tensor code = sae_encode(w, vr);
    const Tensor rec = sae_decode(w, code);
    Tensor diff({4});
    for (std::size_t k = 0; k < 4; ++k) diff[k] = vr[k] - rec[k];
    double l1 = 0;
    for (double x : code.data()) l1 += std::abs(x);
    expect += oracle_inner(diff, diff, m) + 0.2 * l1;
  }
  EXPECT_NEAR(got, expect / 3, 1e-12);
}

TEST(ReconLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(9);
  for (bool freeze : {false, true}) {
    for (int t = 0; t < 5; ++t) {
      Rng rng(100 + t);
      Sae sae(8, 4, rng);  // W is 4 x 8
      const Tensor v = random_tensor(gen, {2, 8});
      ReconOptions opts;
      opts.gamma = 0.1;
      opts.freeze_metric = freeze;
      Parameter* params[] = {&sae.weight};
      const double err = ad::finite_difference_check(
          [&](ad::Graph& g) { return recon_loss(g, sae, g.constant(v), opts).total; }, params);
      EXPECT_LT(err, 1e-4);
    }
  }
}

TEST(ReconLoss, FrozenMetricDropsOnlyTheMetricPath) {
  std::mt19937_64 gen(10);
  Rng rng(10);
  Sae sae(5, 6, rng);
  const Tensor v = random_tensor(gen, {3, 5});
  auto grad = [&](bool freeze) {
    ReconOptions opts;
    opts.freeze_metric = freeze;
    sae.weight.zero_grad();
    ad::Graph g;
    g.backward(recon_loss(g, sae, g.constant(v), opts).total);
    return sae.weight.grad;
  };
  const Tensor full = grad(false);
  const Tensor frozen = grad(true);
  EXPECT_NE(full, frozen);
  ad::Graph g;
  ReconOptions a, b;
  b.freeze_metric = true;
  EXPECT_EQ(recon_loss(g, sae, g.constant(v), a).total.value(),
            recon_loss(g, sae, g.constant(v), b).total.value());
}

// ---- projection ---------------------------------------------------------------

struct Instance {
  Tensor w, m, v, v_hat;
};

Instance random_instance(std::mt19937_64& gen, std::size_t d = 8) {
  Instance in;
  in.w = random_tensor(gen, {2 * d, d});
  in.m = metric(in.w);
  in.v = random_tensor(gen, {d});
  in.v_hat = random_tensor(gen, {d});
  return in;
}

TEST(Project, SelfProjectionAndOrthogonalInput) {
  const Tensor m = Tensor::identity(3);
  const Tensor v = Tensor::vector({0.6, 0.8, 0.0});
  const auto self = project(v, v, m, 1e-15);
  EXPECT_NEAR(self.alpha, 1.0, 1e-12);
  EXPECT_LT(std::sqrt(m_norm_sq(self.z, m)), 1e-7);

  std::mt19937_64 gen(11);
  const Tensor w = random_tensor(gen, {6, 3});
  const Tensor mw = metric(w);
  const Tensor a = Tensor::vector({1.0, 0.5, -0.2});
  // Remove the M-component of b along a.
  Tensor b = Tensor::vector({0.3, -1.0, 2.0});
  const double k = oracle_inner(b, a, mw) / oracle_inner(a, a, mw);
  for (std::size_t i = 0; i < 3; ++i) b[i] -= k * a[i];
  const auto orth = project(a, b, mw, 1e-6);
  EXPECT_NEAR(orth.alpha, 0.0, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(orth.z[i], a[i], 1e-12);
}

TEST(Project, ClosedFormMatchesGridArgmin) {
  std::mt19937_64 gen(12);
  for (double eps : {1e-6, 1e-3}) {
    for (int t = 0; t < 50; ++t) {
      auto in = random_instance(gen);
      // Keep the optimum inside the grid.
      const auto p = project(in.v, in.v_hat, in.m, eps);
      if (std::abs(p.alpha) > 9.5) continue;
      const double a2 = oracle_inner(in.v_hat, in.v_hat, in.m);
      const double av = oracle_inner(in.v, in.v_hat, in.m);
      const double vv = oracle_inner(in.v, in.v, in.m);
      auto objective = [&](double a) { return vv - 2 * a * av + a * a * a2 + eps * a * a; };
      double best = 0, best_val = 1e300;
      for (long i = -100000; i <= 100000; ++i) {
        const double a = i * 1e-4;
        const double val = objective(a);
        if (val < best_val) best_val = val, best = a;
      }
      EXPECT_NEAR(p.alpha, best, 1e-3);
      EXPECT_LE(objective(p.alpha), best_val + 1e-9);
    }
  }
}

TEST(Project, ReconstructionIdentity) {
  std::mt19937_64 gen(13);
  for (int t = 0; t < 200; ++t) {
    auto in = random_instance(gen);
    const auto p = project(in.v, in.v_hat, in.m, 1e-6);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_NEAR(p.z[i] + p.alpha * in.v_hat[i], in.v[i], 1e-12);
    }
  }
}

TEST(Project, RejectsBadArguments) {
  const Tensor m = Tensor::identity(2);
  const Tensor v = Tensor::vector({1, 2});
  EXPECT_THROW(project(v, v, m, 0.0), ConfigError);
  EXPECT_THROW(project(v, v, m, -1.0), ConfigError);
  EXPECT_THROW(project(v, Tensor::vector({1, 2, 3}), m, 1e-6), ShapeError);
  const Tensor not_psd = Tensor::matrix({{-5, 0}, {0, -5}});
  EXPECT_THROW(project(v, v, not_psd, 1e-6), DomainError);
}

TEST(OrthogonalityDeviation, MatchesClosedForm) {
  std::mt19937_64 gen(14);
  for (int t = 0; t < 1000; ++t) {
    auto in = random_instance(gen);
    const double eps = std::pow(10.0, -1.0 - 7.0 * std::uniform_real_distribution<>(0, 1)(gen));
    const auto d = orthogonality_deviation(in.v, in.v_hat, in.m, eps);
    // Independent closed form with oracle inner products.
    const double analytic = oracle_inner(in.v, in.v_hat, in.m) * eps /
                            (oracle_inner(in.v_hat, in.v_hat, in.m) + eps);
    EXPECT_NEAR(d.analytic, analytic, 1e-10 * std::abs(analytic) + 1e-300);
    // <z, v_hat>_M is a difference of two O(1) terms; compare on that scale.
    const double scale = std::abs(oracle_inner(in.v, in.v_hat, in.m));
    EXPECT_NEAR(d.measured, analytic, 1e-10 * std::max(scale, 1e-300));
  }
}

TEST(OrthogonalityDeviation, VanishesAsEpsilonShrinks) {
  std::mt19937_64 gen(15);
  int checked = 0;
  while (checked < 50) {
    auto in = random_instance(gen);
    const double vv = oracle_inner(in.v, in.v_hat, in.m);
    if (vv <= 0) continue;
    ++checked;
    double previous = -1.0;
    for (double eps : {1e-8, 1e-6, 1e-4, 1e-2}) {
      const double dev = std::abs(orthogonality_deviation(in.v, in.v_hat, in.m, eps).analytic);
      EXPECT_GE(dev, previous);
      previous = dev;
    }
  }
  // Unit-norm v_hat at eps = 1e-12.
  auto in = random_instance(gen);
  const double n = std::sqrt(oracle_inner(in.v_hat, in.v_hat, in.m));
  for (auto& x : in.v_hat.data()) x /= n;
  const auto d = orthogonality_deviation(in.v, in.v_hat, in.m, 1e-12);
  EXPECT_LT(std::abs(d.analytic), 1e-10 * std::abs(oracle_inner(in.v, in.v_hat, in.m)));
}

TEST(Stability, BoundHoldsOnRandomInstances) {
  std::mt19937_64 gen(16);
  std::uniform_real_distribution<> u(0, 1);
  for (int t = 0; t < 1000; ++t) {
    auto in = random_instance(gen, 6);
    if (t % 3 == 0) {
      for (std::size_t i = 0; i < 6; ++i) in.v_hat[i] = in.v[i] + 0.05 * in.v_hat[i];
    }
    const double eps = std::pow(10.0, -6.0 + 4.0 * u(gen));
    const auto s = stability_check(in.v, in.v_hat, in.m, eps);
    EXPECT_LE(s.lhs, s.rhs) << "instance " << t;
  }
}

TEST(Stability, ZeroPerturbationAndLinearGrowth) {
  std::mt19937_64 gen(17);
  auto in = random_instance(gen);
  const auto zero = stability_check(in.v, in.v, in.m, 1e-4);
  EXPECT_EQ(zero.lhs, 0.0);
  EXPECT_EQ(zero.rhs, 0.0);

  const Tensor u = random_tensor(gen, {8});
  std::vector<double> ratio;
  for (double t : {1e-3, 1e-2, 1e-1}) {
    Tensor v_hat = in.v;
    for (std::size_t i = 0; i < 8; ++i) v_hat[i] += t * u[i];
    ratio.push_back(stability_check(in.v, v_hat, in.m, 1e-4).lhs / t);
  }
  EXPECT_LE(ratio[1], ratio[0] * 1.1);
  EXPECT_LE(ratio[2], ratio[1] * 1.1);
}

TEST(ProjectRows, MatchesSingleProjection) {
  std::mt19937_64 gen(18);
  const Tensor w = random_tensor(gen, {10, 5});
  const Tensor v = random_tensor(gen, {4, 5});
  const Tensor vh = random_tensor(gen, {4, 5});
  ad::Graph g;
  for (bool euclid : {false, true}) {
    const MetricView mv = euclid ? MetricView::euclidean() : MetricView::dictionary(g.constant(w));
    const Tensor m = euclid ? Tensor::identity(5) : metric(w);
    const auto rows = project_rows(mv, g.constant(v), g.constant(vh), 1e-6);
    for (std::size_t r = 0; r < 4; ++r) {
      Tensor vr({5}), hr({5});
      for (std::size_t k = 0; k < 5; ++k) vr[k] = v.at(r, k), hr[k] = vh.at(r, k);
      const auto p = project(vr, hr, m, 1e-6);
      EXPECT_NEAR(rows.alpha.value()[r], p.alpha, 1e-12);
      for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(rows.z.value().at(r, k), p.z[k], 1e-12);
    }
  }
}

TEST(ProjectRows, GradientFlowsThroughAlphaUnlessDetached) {
  std::mt19937_64 gen(19);
  const Tensor w0 = random_tensor(gen, {6, 3});
  const Tensor v = random_tensor(gen, {2, 3});
  const Tensor vh = random_tensor(gen, {2, 3});
  std::vector<Tensor> params{w0, v, vh};
  for (bool detach : {false, true}) {
    auto f = [detach](ad::Graph&, std::span<const ad::Var> p) {
      const auto r = project_rows(MetricView::dictionary(p[0]), p[1], p[2], 1e-3, detach);
      return ad::sq_l2_norm(r.z);
    };
    const double err = ad::finite_difference_check(f, params);
    // Finite differences hold stop_gradient outputs fixed, so both agree.
    EXPECT_LT(err, 1e-4);
  }
  auto grad_of_v_hat = [&](bool detach) {
    ad::Graph g;
    ad::Var vh_var = g.variable(vh);
    const auto r = project_rows(MetricView::dictionary(g.constant(w0)), g.constant(v), vh_var,
                                1e-3, detach);
    g.backward(ad::sq_l2_norm(r.z));
    return vh_var.grad();
  };
  EXPECT_NE(grad_of_v_hat(false), grad_of_v_hat(true));
}

TEST(DomainLoss, UniformLogitsGiveLn2) {
  Rng rng(20);
  DomainHead head(4, 8, 6, rng);
  head.out.weight.value.fill(0.0);
  std::mt19937_64 gen(20);
  ad::Graph g;
  const auto loss = domain_loss(g, head, g.constant(random_tensor(gen, {3, 4})),
                                g.constant(random_tensor(gen, {5, 4})));
  EXPECT_NEAR(loss.value().item(), std::log(2.0), 1e-15);
  const auto p = head.target_probability(g, g.constant(random_tensor(gen, {2, 4})));
  EXPECT_NEAR(p.value()[0], 0.5, 1e-15);
}

TEST(DomainLoss, MatchesHandComputedCrossEntropy) {
  Rng rng(21);
  DomainHead head(3, 4, 4, rng);
  std::mt19937_64 gen(21);
  const Tensor zs = random_tensor(gen, {2, 3});
  const Tensor zt = random_tensor(gen, {3, 3});
  ad::Graph g;
  const double got = domain_loss(g, head, g.constant(zs), g.constant(zt)).value().item();
  const Tensor ls = head.logits(g, g.constant(zs)).value();
  const Tensor lt = head.logits(g, g.constant(zt)).value();
  auto ce = [](const Tensor& l, std::size_t cls) {
    double s = 0;
    for (std::size_t i = 0; i < l.rows(); ++i) {
      const double lse = std::log(std::exp(l.at(i, 0)) + std::exp(l.at(i, 1)));
      s += lse - l.at(i, cls);
    }
    return s / static_cast<double>(l.rows());
  };
  EXPECT_NEAR(got, 0.5 * (ce(ls, 0) + ce(lt, 1)), 1e-12);
}

TEST(DomainLoss, GradientMatchesFiniteDifferences) {
  Rng rng(22);
  DomainHead head(4, 6, 5, rng);
  std::mt19937_64 gen(22);
  const Tensor zs = random_tensor(gen, {4, 4});
  const Tensor zt = random_tensor(gen, {4, 4});
  const auto params = head.parameters();
  const double err = ad::finite_difference_check(
      [&](ad::Graph& g) { return domain_loss(g, head, g.constant(zs), g.constant(zt)); }, params);
  EXPECT_LT(err, 1e-4);
}

TEST(DomainLoss, HeadSeparatesClustersWithinTwoHundredSteps) {
  int converged = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    Tensor zs({32, 8}), zt({32, 8});
    for (std::size_t i = 0; i < zs.size(); ++i) {
      zs[i] = -1.0 + noise(gen);
      zt[i] = 1.0 + noise(gen);
    }
    Rng rng(seed);
    DomainHead head(8, 16, 8, rng);
    Adam adam(head.parameters());
    double loss = 0.0;
    for (int step = 0; step < 200; ++step) {
      ad::Graph g;
      ad::Var l = domain_loss(g, head, g.constant(zs), g.constant(zt));
      loss = l.value().item();
      g.backward(l);
      adam.step(1e-3);
    }
    ad::Graph g;
    loss = domain_loss(g, head, g.constant(zs), g.constant(zt)).value().item();
    if (loss < 0.1) ++converged;
  }
  EXPECT_GE(converged, 3);
}

}  // namespace
}  // namespace orthocare
