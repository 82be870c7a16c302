#include "corefdre/classifier.hpp"

#include "corefdre/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace corefdre {

Var assemble_features(Var e_s, Var e_o, Var p_so) {
  if (e_s.cols() != e_o.cols() || e_s.rows() != e_o.rows() || p_so.rows() != e_s.rows())
    throw std::invalid_argument("assemble_features: inconsistent shapes");
  return concat_cols({e_s, e_o, abs(sub(e_s, e_o)), mul(e_s, e_o), p_so});
}

RelationMlp::RelationMlp(ParameterStore& store, int input_dim, int hidden_dim, int relations, Rng& rng) {
  hidden_weight_ = &store.add("mlp.hidden.weight", input_dim, hidden_dim, Init::kXavierUniform, rng);
  hidden_bias_ = &store.add("mlp.hidden.bias", 1, hidden_dim, Init::kZero, rng);
  output_weight_ = &store.add("mlp.output.weight", hidden_dim, relations, Init::kXavierUniform, rng);
  output_bias_ = &store.add("mlp.output.bias", 1, relations, Init::kZero, rng);
}

Var RelationMlp::logits(Tape& tape, Var features) const {
  Var hidden = relu(add_row(matmul(features, tape.param(*hidden_weight_)), tape.param(*hidden_bias_)));
  return add_row(matmul(hidden, tape.param(*output_weight_)), tape.param(*output_bias_));
}

Var relation_loss(Var probabilities, const Matrix& gold, double eps) {
  if (probabilities.rows() != gold.rows() || probabilities.cols() != gold.cols())
    throw std::invalid_argument("relation_loss: gold shape differs from predictions");
  return bce_sum(probabilities, gold, eps);
}

Matrix gold_matrix(const Document& doc, std::span<const EntityPair> pairs, int relations) {
  Matrix gold = Matrix::Zero(static_cast<Eigen::Index>(pairs.size()), relations);
  for (size_t k = 0; k < pairs.size(); ++k)
    for (const RelationFact& f : doc.facts)
      if (f.head_entity == pairs[k].first && f.tail_entity == pairs[k].second)
        gold(static_cast<Eigen::Index>(k), f.relation_id) = 1.0;
  return gold;
}

std::vector<EntityPair> all_entity_pairs(int entities) {
  std::vector<EntityPair> out;
  for (int s = 0; s < entities; ++s)
    for (int o = 0; o < entities; ++o)
      if (s != o) out.emplace_back(s, o);
  return out;
}

ThresholdChoice select_threshold(std::span<const double> probabilities, std::span<const char> gold) {
  if (probabilities.size() != gold.size()) throw std::invalid_argument("select_threshold: size mismatch");
  const auto total_gold = static_cast<std::size_t>(std::count_if(gold.begin(), gold.end(), [](char g) { return g != 0; }));
  if (probabilities.empty()) return {1.0, 0.0};
  if (total_gold == 0) {
    const double top = *std::max_element(probabilities.begin(), probabilities.end());
    return {std::nextafter(top, std::numeric_limits<double>::infinity()), 0.0};
  }
  std::vector<size_t> order(probabilities.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return probabilities[a] > probabilities[b]; });

  ThresholdChoice best{probabilities[order.front()], -1.0};
  std::size_t predicted = 0;
  std::size_t correct = 0;
  size_t i = 0;
  while (i < order.size()) {
    const double t = probabilities[order[i]];
    while (i < order.size() && probabilities[order[i]] == t) {
      ++predicted;
      correct += gold[order[i]] != 0 ? 1 : 0;
      ++i;
    }
    const double f1 = score_counts(correct, predicted, total_gold).f1;
    // Later candidates are smaller thresholds, so ties move the choice down.
    if (f1 >= best.f1) best = {t, f1};
  }
  return best;
}

std::vector<ThresholdChoice> select_relation_thresholds(const Matrix& probabilities, const Matrix& gold) {
  std::vector<ThresholdChoice> out;
  for (Eigen::Index r = 0; r < probabilities.cols(); ++r) {
    std::vector<double> p(static_cast<size_t>(probabilities.rows()));
    std::vector<char> g(p.size());
    for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
      p[static_cast<size_t>(i)] = probabilities(i, r);
      g[static_cast<size_t>(i)] = gold(i, r) != 0.0 ? 1 : 0;
    }
    out.push_back(select_threshold(p, g));
  }
  return out;
}

}  // namespace corefdre
