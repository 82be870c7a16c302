#include "corefdre/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace corefdre {

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  // Box-Muller; one of the pair is discarded.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Parameter& ParameterStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng) {
  Matrix value = Matrix::Zero(rows, cols);
  switch (init) {
    case Init::kZero:
      break;
    case Init::kXavierUniform: {
      const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = rng.uniform(-limit, limit);
      break;
    }
    case Init::kNormalSmall:
      for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = 0.1 * rng.normal();
      break;
  }
  return add(name, std::move(value));
}

Parameter& ParameterStore::add(const std::string& name, Matrix value) {
  if (index_.count(name) != 0) throw std::invalid_argument("duplicate parameter name: " + name);
  index_[name] = params_.size();
  params_.emplace_back(name, std::move(value));
  return params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += static_cast<std::size_t>(p.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (Parameter& p : params_) p.zero_grad();
}

bool ParameterStore::all_finite() const {
  for (const Parameter& p : params_)
    if (!p.value().allFinite()) return false;
  return true;
}

void AdamW::step(ParameterStore& store, double grad_scale) {
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = options_.learning_rate;
  for (Parameter& p : store.all()) {
    if (p.first_moment_.size() == 0) {
      p.first_moment_ = Matrix::Zero(p.value_.rows(), p.value_.cols());
      p.second_moment_ = Matrix::Zero(p.value_.rows(), p.value_.cols());
    }
    const auto g = (p.grad_ * grad_scale).array();
    p.first_moment_.array() = b1 * p.first_moment_.array() + (1.0 - b1) * g;
    p.second_moment_.array() = b2 * p.second_moment_.array() + (1.0 - b2) * g.square();
    if (options_.weight_decay != 0.0) p.value_ *= (1.0 - lr * options_.weight_decay);
    p.value_.array() -= lr * (p.first_moment_.array() / correction1) /
                        ((p.second_moment_.array() / correction2).sqrt() + options_.epsilon);
    p.zero_grad();
  }
}

}  // namespace corefdre
