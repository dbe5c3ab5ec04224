#pragma once

#include <Eigen/Dense>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace udkit::nn {

using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// One named trainable array plus its accumulated gradient and optimizer
// state. Adam moments are lazily allocated by the optimizer.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m, v, vhat;
  int64_t steps = 0;
  bool trainable = true;

  int rows() const { return static_cast<int>(value.rows()); }
  int cols() const { return static_cast<int>(value.cols()); }
  void zero_grad() { grad.setZero(); }
};

// Owns parameters; iteration order is insertion order, which also fixes the
// serialization order.
class ParamCollection {
 public:
  Param& add(const std::string& name, int rows, int cols);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;

  std::vector<Param*> all();
  std::vector<const Param*> all() const;

  void zero_grad();
  size_t size() const { return params_.size(); }
  size_t scalar_count() const;

  // Deep copy of all values (optimizer state excluded), aligned by position.
  std::vector<Mat> snapshot_values() const;
  void restore_values(const std::vector<Mat>& values);

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

// Initializers. Biases stay zero; input matrices are fan-in scaled uniform;
// recurrent matrices are orthogonal (per square block when rows > cols).
void init_uniform_fan_in(Mat& m, Rng& rng);
void init_orthogonal(Mat& m, Rng& rng);
void init_uniform(Mat& m, double radius, Rng& rng);
void init_normal(Mat& m, double stddev, Rng& rng);

}  // namespace udkit::nn
