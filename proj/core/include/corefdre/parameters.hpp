// Trainable parameters, deterministic initialisation and the AdamW optimiser.
#pragma once

#include "corefdre/autograd.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace corefdre {

// Seeded generator with platform-independent conversions. std::*_distribution
// output differs between standard libraries, so they are avoided.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0.
  std::size_t index(std::size_t n);
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

class Parameter {
 public:
  Parameter(std::string name, Matrix value)
      : name_(std::move(name)), value_(std::move(value)), grad_(Matrix::Zero(value_.rows(), value_.cols())) {}

  const std::string& name() const { return name_; }
  Matrix& value() { return value_; }
  const Matrix& value() const { return value_; }
  Matrix& grad() { return grad_; }
  const Matrix& grad() const { return grad_; }
  void zero_grad() { grad_.setZero(); }

 private:
  friend class AdamW;
  std::string name_;
  Matrix value_;
  Matrix grad_;
  Matrix first_moment_;
  Matrix second_moment_;
};

enum class Init { kZero, kXavierUniform, kNormalSmall };

// Owns parameters in insertion order; addresses are stable.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng);
  Parameter& add(const std::string& name, Matrix value);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }
  std::size_t scalar_count() const;

  void zero_grad();
  bool all_finite() const;

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

struct AdamWOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(AdamWOptions options) : options_(options) {}

  // Applies one update using the accumulated gradients, scaled by
  // `grad_scale`, then zeroes them.
  void step(ParameterStore& store, double grad_scale = 1.0);
  std::int64_t steps() const { return step_; }

 private:
  AdamWOptions options_;
  std::int64_t step_ = 0;
};

}  // namespace corefdre
