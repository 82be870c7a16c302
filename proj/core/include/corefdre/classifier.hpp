// Entity-pair features, the multi-label relation MLP, its loss, and decision
// thresholds.
#pragma once

#include "corefdre/autograd.hpp"
#include "corefdre/corpus.hpp"
#include "corefdre/entity_graph.hpp"
#include "corefdre/parameters.hpp"

#include <span>
#include <vector>

namespace corefdre {

// [e_s; e_o; |e_s - e_o|; e_s * e_o; p_so], row-wise for batches.
Var assemble_features(Var e_s, Var e_o, Var p_so);
inline int feature_width(int entity_dim, int path_width) { return 4 * entity_dim + path_width; }

// One hidden ReLU layer, then a sigmoid per relation.
class RelationMlp {
 public:
  RelationMlp(ParameterStore& store, int input_dim, int hidden_dim, int relations, Rng& rng);

  Var logits(Tape& tape, Var features) const;
  Var probabilities(Tape& tape, Var features) const { return sigmoid(logits(tape, features)); }

  int input_dim() const { return static_cast<int>(hidden_weight_->value().rows()); }
  int relations() const { return static_cast<int>(output_weight_->value().cols()); }
  Parameter& output_weight() { return *output_weight_; }
  Parameter& output_bias() { return *output_bias_; }

 private:
  Parameter* hidden_weight_;
  Parameter* hidden_bias_;
  Parameter* output_weight_;
  Parameter* output_bias_;
};

inline constexpr double kProbabilityEpsilon = 1e-12;

// Summed binary cross-entropy over every (pair, relation) cell.
Var relation_loss(Var probabilities, const Matrix& gold, double eps = kProbabilityEpsilon);

// pairs x relations indicator of the document's facts.
Matrix gold_matrix(const Document& doc, std::span<const EntityPair> pairs, int relations);

// Every ordered pair of distinct entities, subject-major.
std::vector<EntityPair> all_entity_pairs(int entities);

struct ThresholdChoice {
  double threshold = 0.5;
  double f1 = 0.0;
};

// Sweeps the distinct predicted probabilities (predict when p >= t) and keeps
// the best micro-F1; ties go to the smaller threshold. Without any gold cell
// the threshold sits just above the largest probability.
ThresholdChoice select_threshold(std::span<const double> probabilities, std::span<const char> gold);

// The same sweep per relation column.
std::vector<ThresholdChoice> select_relation_thresholds(const Matrix& probabilities, const Matrix& gold);

}  // namespace corefdre
