// The full relation model: token encoder, MPAG convolution, pronoun merge,
// entity graph, path attention and the relation classifier, plus the frozen
// affinity scorer that weights mention-pronoun edges.
#pragma once

#include "corefdre/affinity.hpp"
#include "corefdre/archive.hpp"
#include "corefdre/classifier.hpp"
#include "corefdre/config.hpp"
#include "corefdre/coref.hpp"
#include "corefdre/encoding.hpp"
#include "corefdre/entity_graph.hpp"
#include "corefdre/mpag.hpp"

#include <memory>
#include <span>
#include <vector>

namespace corefdre {

// Everything about a document that does not depend on trainable parameters.
// Affinities come from the frozen scorer, so they are computed once here.
struct PreparedDocument {
  Document doc;
  TokenIndex tokens;
  std::vector<PronounOccurrence> pronouns;
  std::vector<MentionPronounPair> pairs;
  Mpag graph;
  GraphOperators operators;
  std::vector<MentionRef> mentions;  // mention nodes in node order
  std::vector<int> pronoun_nodes;    // pronoun index of each pronoun node
  SparseMatrix merge;                // mention nodes x nodes
  SparseMatrix entity_average;       // entities x mention nodes
  EntityAdjacency adjacency;
  std::vector<EntityPair> candidates;  // all ordered entity pairs
  Matrix gold;                         // candidates x relations
};

class RelationModel {
 public:
  RelationModel(const PipelineConfig& config, RelationSchema schema, Vocabulary vocab, TypeInventory types,
                AffinityModel affinity, std::uint64_t seed);
  RelationModel(const RelationModel&) = delete;
  RelationModel& operator=(const RelationModel&) = delete;

  // Vocabulary and type inventory from `train`; optional word vectors loaded.
  static std::unique_ptr<RelationModel> create(const PipelineConfig& config, const RelationSchema& schema,
                                               const std::vector<Document>& train, const AffinityModel& affinity);

  PreparedDocument prepare(const Document& doc) const { return prepare(doc, config_.theta); }
  PreparedDocument prepare(const Document& doc, double theta) const;

  // pairs x relations probabilities. Passing `dropout_rng` selects training
  // mode.
  Var forward(Tape& tape, const PreparedDocument& doc, std::span<const EntityPair> pairs,
              Rng* dropout_rng = nullptr) const;
  // Evaluation-mode probabilities for every candidate pair.
  Matrix probabilities(const PreparedDocument& doc) const;

  const PipelineConfig& config() const { return config_; }
  const RelationSchema& schema() const { return schema_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const TypeInventory& types() const { return types_; }
  const AffinityModel& affinity() const { return affinity_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  int node_dim() const { return node_dim_; }
  int entity_dim() const { return entity_dim_; }
  int path_width() const { return path_width_; }
  int feature_dim() const { return feature_width(entity_dim_, path_width_); }

  double threshold() const { return threshold_; }
  // Threshold applied to relation r (global unless per-relation is enabled).
  double threshold(int relation) const;
  void set_thresholds(double global, std::vector<double> per_relation);
  const std::vector<double>& relation_thresholds() const { return relation_thresholds_; }

  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t steps) { steps_ = steps; }

  Archive to_archive() const;
  static std::unique_ptr<RelationModel> from_archive(const Archive& archive);
  // Fails unless `requested` has the same architecture as the stored config.
  void check_architecture(const PipelineConfig& requested) const;

 private:
  PipelineConfig config_;
  RelationSchema schema_;
  Vocabulary vocab_;
  TypeInventory types_;
  AffinityModel affinity_;
  PronounLexicon lexicon_;
  ParameterStore params_;

  EmbeddingTables tables_;
  std::unique_ptr<ContextualEncoder> encoder_;
  NodeTypeEmbeddings node_types_;
  std::unique_ptr<HeteroGcn> gcn_;
  EntityEdgeParams edge_;
  PathAttentionParams attention_;
  std::unique_ptr<RelationMlp> mlp_;

  int node_dim_ = 0;
  int entity_dim_ = 0;
  int path_width_ = 0;
  double threshold_ = 0.5;
  std::vector<double> relation_thresholds_;
  std::uint64_t steps_ = 0;
};

}  // namespace corefdre
