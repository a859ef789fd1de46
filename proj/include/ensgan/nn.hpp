#pragma once

// Minimal dense layers with hand-written backward passes, sized for the
// tabular GAN. Batches are stored column-wise: a (features x batch) matrix.

#include <Eigen/Dense>

#include <vector>

#include "ensgan/common.hpp"
#include "json.hpp"

namespace ensgan::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct AdamParams {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct Linear {
  Matrix weight;  // out x in
  Vector bias;
  Matrix grad_weight;
  Vector grad_bias;
  Matrix m_weight, v_weight;
  Vector m_bias, v_bias;

  Linear() = default;
  // Uniform(-1/sqrt(in), 1/sqrt(in)) initialisation.
  Linear(Eigen::Index in, Eigen::Index out, Rng& rng);

  Matrix forward(const Matrix& x) const;
  // Accumulates parameter gradients; returns d(loss)/dx.
  Matrix backward(const Matrix& x, const Matrix& dy, bool accumulate = true);
  void zero_grad();
  void adam_step(const AdamParams& p, long step);

  nlohmann::json to_json() const;
  static Linear from_json(const nlohmann::json& doc);
};

// Input -> [ReLU(Linear) concatenated with its input] x 2 -> Linear.
class ResidualGenerator {
 public:
  struct Cache {
    Matrix h0, pre1, h1, pre2, h2;
  };

  ResidualGenerator() = default;
  ResidualGenerator(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, Rng& rng);

  Matrix forward(const Matrix& input, Cache* cache) const;
  void backward(const Cache& cache, const Matrix& d_out);
  void zero_grad();
  void adam_step(const AdamParams& p, long step);

  std::vector<Linear*> layers() { return {&l1_, &l2_, &out_}; }
  nlohmann::json to_json() const;
  static ResidualGenerator from_json(const nlohmann::json& doc);

 private:
  Linear l1_, l2_, out_;
};

// Input -> LeakyReLU(0.2)(Linear) x 2 -> Linear(1): one logit per column.
class Discriminator {
 public:
  struct Cache {
    Matrix input, pre1, a1, pre2, a2;
  };

  Discriminator() = default;
  Discriminator(Eigen::Index in, Eigen::Index hidden, Rng& rng);

  Matrix forward(const Matrix& input, Cache* cache) const;
  // Returns d(loss)/d(input). Parameter gradients accumulate only when
  // `accumulate` is set (the generator step leaves them untouched).
  Matrix backward(const Cache& cache, const Matrix& d_out, bool accumulate);
  void zero_grad();
  void adam_step(const AdamParams& p, long step);

  std::vector<Linear*> layers() { return {&l1_, &l2_, &out_}; }
  nlohmann::json to_json() const;
  static Discriminator from_json(const nlohmann::json& doc);

 private:
  Linear l1_, l2_, out_;
};

inline constexpr double kLeakySlope = 0.2;

}  // namespace ensgan::nn
