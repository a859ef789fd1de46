#include <gtest/gtest.h>

#include "ensgan/nn.hpp"

using namespace ensgan;
using namespace ensgan::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// loss = sum(probe .* f(x)); d loss / d out = probe.
template <typename Net>
double probe_loss(const Net& net, const Matrix& x, const Matrix& probe) {
  return (net.forward(x, nullptr).array() * probe.array()).sum();
}

template <typename Net>
void check_parameter_gradients(Net& net, const Matrix& x, const Matrix& probe,
                               const std::function<void(Net&)>& run_backward) {
  net.zero_grad();
  run_backward(net);
  const double h = 1e-6;
  for (Linear* layer : net.layers()) {
    for (Eigen::Index i = 0; i < layer->weight.size(); i += 7) {
      double& w = layer->weight.data()[i];
      const double saved = w;
      w = saved + h;
      const double up = probe_loss(net, x, probe);
      w = saved - h;
      const double down = probe_loss(net, x, probe);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      EXPECT_NEAR(layer->grad_weight.data()[i], numeric, 1e-5 * (1 + std::abs(numeric)));
    }
    for (Eigen::Index i = 0; i < layer->bias.size(); i += 3) {
      double& b = layer->bias[i];
      const double saved = b;
      b = saved + h;
      const double up = probe_loss(net, x, probe);
      b = saved - h;
      const double down = probe_loss(net, x, probe);
      b = saved;
      EXPECT_NEAR(layer->grad_bias[i], (up - down) / (2 * h), 1e-5);
    }
  }
}

}  // namespace

TEST(Linear, BackwardMatchesFiniteDifferences) {
  Rng rng(1);
  Linear l(4, 3, rng);
  const Matrix x = random_matrix(4, 5, rng);
  const Matrix probe = random_matrix(3, 5, rng);
  l.zero_grad();
  const Matrix dx = l.backward(x, probe);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double numeric =
        ((l.forward(xp).array() * probe.array()).sum() - (l.forward(xm).array() * probe.array()).sum()) / (2 * h);
    EXPECT_NEAR(dx.data()[i], numeric, 1e-6);
  }
  EXPECT_TRUE(l.grad_weight.isApprox(probe * x.transpose()));
}

TEST(ResidualGenerator, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(2);
  ResidualGenerator g(6, 8, 5, rng);
  const Matrix x = random_matrix(6, 4, rng);
  const Matrix probe = random_matrix(5, 4, rng);
  check_parameter_gradients<ResidualGenerator>(g, x, probe, [&](ResidualGenerator& net) {
    ResidualGenerator::Cache cache;
    net.forward(x, &cache);
    net.backward(cache, probe);
  });
}

TEST(Discriminator, ParameterAndInputGradientsMatchFiniteDifferences) {
  Rng rng(3);
  Discriminator d(5, 7, rng);
  const Matrix x = random_matrix(5, 6, rng);
  const Matrix probe = random_matrix(1, 6, rng);
  check_parameter_gradients<Discriminator>(d, x, probe, [&](Discriminator& net) {
    Discriminator::Cache cache;
    net.forward(x, &cache);
    net.backward(cache, probe, true);
  });

  Discriminator::Cache cache;
  d.forward(x, &cache);
  d.zero_grad();
  const Matrix dx = d.backward(cache, probe, false);
  EXPECT_EQ(d.layers()[0]->grad_weight.norm(), 0.0);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double numeric = (probe_loss(d, xp, probe) - probe_loss(d, xm, probe)) / (2 * h);
    EXPECT_NEAR(dx.data()[i], numeric, 1e-5);
  }
}

TEST(Adam, StepMovesAgainstTheGradient) {
  Rng rng(4);
  Linear l(2, 1, rng);
  l.zero_grad();
  l.grad_weight.setConstant(1.0);
  l.grad_bias.setConstant(-1.0);
  const Matrix w0 = l.weight;
  const Vector b0 = l.bias;
  AdamParams p;
  p.lr = 0.01;
  l.adam_step(p, 1);
  // First bias-corrected Adam step has magnitude lr in every coordinate.
  EXPECT_NEAR((w0 - l.weight).maxCoeff(), 0.01, 1e-6);
  EXPECT_NEAR((l.bias - b0).maxCoeff(), 0.01, 1e-6);
}

TEST(Serialization, JsonRoundTripPreservesOutputs) {
  Rng rng(5);
  ResidualGenerator g(3, 4, 2, rng);
  Discriminator d(2, 4, rng);
  const Matrix x = random_matrix(3, 5, rng);
  const ResidualGenerator g2 = ResidualGenerator::from_json(g.to_json());
  const Discriminator d2 = Discriminator::from_json(d.to_json());
  EXPECT_EQ(g.forward(x, nullptr), g2.forward(x, nullptr));
  const Matrix y = g.forward(x, nullptr);
  EXPECT_EQ(d.forward(y, nullptr), d2.forward(y, nullptr));
}
