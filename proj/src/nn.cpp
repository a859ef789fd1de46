#include "ensgan/nn.hpp"

#include <cmath>

namespace ensgan::nn {
namespace {

std::vector<double> flatten(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_grad(const Matrix& pre, const Matrix& dy) {
  return (pre.array() > 0.0).cast<double>() * dy.array();
}

Matrix leaky(const Matrix& x) {
  return x.unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
}

Matrix leaky_grad(const Matrix& pre, const Matrix& dy) {
  return pre.unaryExpr([](double v) { return v > 0 ? 1.0 : kLeakySlope; }).cwiseProduct(dy);
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

Linear::Linear(Eigen::Index in, Eigen::Index out, Rng& rng)
    : weight(out, in), bias(out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index j = 0; j < in; ++j) {
    for (Eigen::Index i = 0; i < out; ++i) weight(i, j) = (2 * rng.uniform() - 1) * bound;
  }
  for (Eigen::Index i = 0; i < out; ++i) bias(i) = (2 * rng.uniform() - 1) * bound;
  zero_grad();
  m_weight = Matrix::Zero(out, in);
  v_weight = Matrix::Zero(out, in);
  m_bias = Vector::Zero(out);
  v_bias = Vector::Zero(out);
}

Matrix Linear::forward(const Matrix& x) const {
  Matrix y = weight * x;
  y.colwise() += bias;
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy, bool accumulate) {
  if (accumulate) {
    grad_weight.noalias() += dy * x.transpose();
    grad_bias += dy.rowwise().sum();
  }
  return weight.transpose() * dy;
}

void Linear::zero_grad() {
  grad_weight = Matrix::Zero(weight.rows(), weight.cols());
  grad_bias = Vector::Zero(bias.size());
}

void Linear::adam_step(const AdamParams& p, long step) {
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(step));
  m_weight = p.beta1 * m_weight + (1 - p.beta1) * grad_weight;
  v_weight = p.beta2 * v_weight + (1 - p.beta2) * grad_weight.cwiseProduct(grad_weight);
  m_bias = p.beta1 * m_bias + (1 - p.beta1) * grad_bias;
  v_bias = p.beta2 * v_bias + (1 - p.beta2) * grad_bias.cwiseProduct(grad_bias);
  weight.array() -= p.lr * (m_weight.array() / c1) / ((v_weight.array() / c2).sqrt() + p.eps);
  bias.array() -= p.lr * (m_bias.array() / c1) / ((v_bias.array() / c2).sqrt() + p.eps);
}

nlohmann::json Linear::to_json() const {
  return {{"in", weight.cols()}, {"out", weight.rows()}, {"weight", flatten(weight)},
          {"bias", flatten(bias)}};
}

Linear Linear::from_json(const nlohmann::json& doc) {
  Linear l;
  const auto in = doc.at("in").get<Eigen::Index>();
  const auto out = doc.at("out").get<Eigen::Index>();
  const auto w = doc.at("weight").get<std::vector<double>>();
  const auto b = doc.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out) {
    throw std::runtime_error("layer shape mismatch");
  }
  l.weight = Eigen::Map<const Matrix>(w.data(), out, in);
  l.bias = Eigen::Map<const Vector>(b.data(), out);
  l.zero_grad();
  l.m_weight = Matrix::Zero(out, in);
  l.v_weight = Matrix::Zero(out, in);
  l.m_bias = Vector::Zero(out);
  l.v_bias = Vector::Zero(out);
  return l;
}

// ---------------------------------------------------------------------------

ResidualGenerator::ResidualGenerator(Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
                                     Rng& rng)
    : l1_(in, hidden, rng), l2_(in + hidden, hidden, rng), out_(in + 2 * hidden, out, rng) {}

Matrix ResidualGenerator::forward(const Matrix& input, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.h0 = input;
  c.pre1 = l1_.forward(c.h0);
  c.h1 = vstack(relu(c.pre1), c.h0);
  c.pre2 = l2_.forward(c.h1);
  c.h2 = vstack(relu(c.pre2), c.h1);
  return out_.forward(c.h2);
}

void ResidualGenerator::backward(const Cache& c, const Matrix& d_out) {
  const Eigen::Index hidden = c.pre1.rows();
  const Matrix dh2 = out_.backward(c.h2, d_out);
  Matrix dh1 = dh2.bottomRows(c.h1.rows());
  dh1 += l2_.backward(c.h1, relu_grad(c.pre2, dh2.topRows(hidden)));
  l1_.backward(c.h0, relu_grad(c.pre1, dh1.topRows(hidden)));
}

void ResidualGenerator::zero_grad() {
  for (Linear* l : layers()) l->zero_grad();
}

void ResidualGenerator::adam_step(const AdamParams& p, long step) {
  for (Linear* l : layers()) l->adam_step(p, step);
}

nlohmann::json ResidualGenerator::to_json() const {
  return {l1_.to_json(), l2_.to_json(), out_.to_json()};
}

ResidualGenerator ResidualGenerator::from_json(const nlohmann::json& doc) {
  ResidualGenerator g;
  g.l1_ = Linear::from_json(doc.at(0));
  g.l2_ = Linear::from_json(doc.at(1));
  g.out_ = Linear::from_json(doc.at(2));
  return g;
}

// ---------------------------------------------------------------------------

Discriminator::Discriminator(Eigen::Index in, Eigen::Index hidden, Rng& rng)
    : l1_(in, hidden, rng), l2_(hidden, hidden, rng), out_(hidden, 1, rng) {}

Matrix Discriminator::forward(const Matrix& input, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.input = input;
  c.pre1 = l1_.forward(c.input);
  c.a1 = leaky(c.pre1);
  c.pre2 = l2_.forward(c.a1);
  c.a2 = leaky(c.pre2);
  return out_.forward(c.a2);
}

Matrix Discriminator::backward(const Cache& c, const Matrix& d_out, bool accumulate) {
  const Matrix da2 = out_.backward(c.a2, d_out, accumulate);
  const Matrix da1 = l2_.backward(c.a1, leaky_grad(c.pre2, da2), accumulate);
  return l1_.backward(c.input, leaky_grad(c.pre1, da1), accumulate);
}

void Discriminator::zero_grad() {
  for (Linear* l : layers()) l->zero_grad();
}

void Discriminator::adam_step(const AdamParams& p, long step) {
  for (Linear* l : layers()) l->adam_step(p, step);
}

nlohmann::json Discriminator::to_json() const {
  return {l1_.to_json(), l2_.to_json(), out_.to_json()};
}

Discriminator Discriminator::from_json(const nlohmann::json& doc) {
  Discriminator d;
  d.l1_ = Linear::from_json(doc.at(0));
  d.l2_ = Linear::from_json(doc.at(1));
  d.out_ = Linear::from_json(doc.at(2));
  return d;
}

}  // namespace ensgan::nn
