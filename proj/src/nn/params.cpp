#include "udkit/nn/params.hpp"

#include <Eigen/QR>
#include <cmath>
#include <stdexcept>

namespace udkit::nn {

Param& ParamCollection::add(const std::string& name, int rows, int cols) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  p->grad = Mat::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Param* ParamCollection::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Param* ParamCollection::find(const std::string& name) const {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::vector<Param*> ParamCollection::all() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamCollection::all() const {
  std::vector<const Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

void ParamCollection::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

size_t ParamCollection::scalar_count() const {
  size_t n = 0;
  for (auto& p : params_) n += static_cast<size_t>(p->value.size());
  return n;
}

std::vector<Mat> ParamCollection::snapshot_values() const {
  std::vector<Mat> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p->value);
  return out;
}

void ParamCollection::restore_values(const std::vector<Mat>& values) {
  if (values.size() != params_.size())
    throw std::logic_error("snapshot size mismatch in restore_values");
  for (size_t i = 0; i < params_.size(); ++i) params_[i]->value = values[i];
}

void init_uniform(Mat& m, double radius, Rng& rng) {
  std::uniform_real_distribution<double> dist(-radius, radius);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

void init_normal(Mat& m, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

void init_uniform_fan_in(Mat& m, Rng& rng) {
  double radius = 1.0 / std::sqrt(static_cast<double>(m.cols()));
  init_uniform(m, radius, rng);
}

void init_orthogonal(Mat& m, Rng& rng) {
  Eigen::Index n = m.cols();
  if (m.rows() % n != 0)
    throw std::logic_error("orthogonal init expects rows to be a multiple of cols");
  for (Eigen::Index block = 0; block < m.rows() / n; ++block) {
    Mat a(n, n);
    init_normal(a, 1.0, rng);
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ() * Mat::Identity(n, n);
    Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    m.block(block * n, 0, n, n) = q;
  }
}

}  // namespace udkit::nn
