#include "corefdre/model.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace corefdre {

namespace {

constexpr const char* kArchiveKind = "relation-model";
constexpr const char* kParamPrefix = "param/";

}  // namespace

RelationModel::RelationModel(const PipelineConfig& config, RelationSchema schema, Vocabulary vocab,
                             TypeInventory types, AffinityModel affinity, std::uint64_t seed)
    : config_(config),
      schema_(std::move(schema)),
      vocab_(std::move(vocab)),
      types_(std::move(types)),
      affinity_(std::move(affinity)),
      lexicon_(PronounLexicon::default_lexicon()) {
  const auto problems = config_.validate();
  if (!problems.empty()) throw ConfigError("invalid configuration: " + problems.front());
  if (schema_.size() == 0) throw ConfigError("relation schema is empty");

  Rng rng(seed);
  tables_ = EmbeddingTables::create(params_, vocab_.size(), config_.word_dim, types_.rows(), config_.type_dim,
                                    config_.max_entities, config_.id_dim, rng);
  if (config_.encoder == EncoderKind::kBiRnn)
    encoder_ = std::make_unique<BiRnnEncoder>(params_, "encoder", tables_.width(), config_.hidden_dim, rng);
  else
    encoder_ = std::make_unique<IdentityEncoder>(tables_.width());
  node_types_ = NodeTypeEmbeddings::create(params_, config_.node_type_dim, rng);
  node_dim_ = encoder_->output_dim() + config_.node_type_dim;
  gcn_ = std::make_unique<HeteroGcn>(params_, node_dim_, config_.gcn_layers, rng);
  entity_dim_ = 2 * gcn_->output_dim();
  edge_ = EntityEdgeParams::create(params_, entity_dim_, config_.edge_dim, rng);
  path_width_ = path_blocks(config_.hops) * config_.edge_dim;
  attention_ = PathAttentionParams::create(params_, entity_dim_, path_width_, rng);
  const int hidden = config_.mlp_hidden > 0 ? config_.mlp_hidden : std::max(1, feature_dim() / 2);
  mlp_ = std::make_unique<RelationMlp>(params_, feature_dim(), hidden, schema_.size(), rng);
  relation_thresholds_.assign(static_cast<size_t>(schema_.size()), threshold_);
}

std::unique_ptr<RelationModel> RelationModel::create(const PipelineConfig& config, const RelationSchema& schema,
                                                     const std::vector<Document>& train,
                                                     const AffinityModel& affinity) {
  auto model = std::make_unique<RelationModel>(config, schema, Vocabulary::build(train), TypeInventory::build(train),
                                               affinity, config.seed);
  if (!config.word_vectors.empty()) load_word_vectors(config.word_vectors, model->vocab_, *model->tables_.words);
  return model;
}

PreparedDocument RelationModel::prepare(const Document& doc, double theta) const {
  PreparedDocument pd;
  pd.doc = doc;
  pd.tokens = index_tokens(doc, vocab_, types_, config_.max_entities + 1);
  pd.pronouns = detect_pronouns(doc, lexicon_);
  pd.pairs = propose_pairs(doc, pd.pronouns, HeuristicProvider(config_.provider_window));
  affinity_.annotate(doc, pd.pronouns, pd.pairs);
  pd.graph = build_mpag(doc, pd.pronouns, pd.pairs,
                        MpagOptions{config_.disable_pronoun_nodes, config_.unweighted_pronoun_edges});
  pd.operators = make_operators(pd.graph, config_.gcn_norm);
  pd.mentions = all_mentions(doc);
  for (const MpagNode& n : pd.graph.nodes())
    if (n.kind == NodeKind::kPronoun) pd.pronoun_nodes.push_back(n.pronoun);
  pd.merge = merge_operator(pd.graph, theta);
  pd.entity_average = entity_average_operator(doc, pd.graph);
  pd.adjacency = entity_connectivity(doc, pd.graph, theta);
  pd.candidates = all_entity_pairs(static_cast<int>(doc.entities.size()));
  pd.gold = gold_matrix(doc, pd.candidates, schema_.size());
  return pd;
}

Var RelationModel::forward(Tape& tape, const PreparedDocument& pd, std::span<const EntityPair> pairs,
                           Rng* dropout_rng) const {
  auto& self = const_cast<RelationModel&>(*this);
  Var hidden = encoder_->encode(tape, embed_document(tape, pd.tokens, tables_));

  Var nodes = mention_node_reps(pd.doc, pd.mentions, hidden, tape.param(*self.node_types_.mention));
  if (!pd.pronoun_nodes.empty()) {
    Var pronouns =
        pronoun_node_reps(pd.doc, pd.pronouns, pd.pronoun_nodes, hidden, tape.param(*self.node_types_.pronoun));
    nodes = concat_rows(std::vector<Var>{nodes, pronouns});
  }

  std::function<double()> uniform;
  if (dropout_rng != nullptr) uniform = [dropout_rng] { return dropout_rng->uniform(); };
  Var reps = gcn_->propagate(tape, pd.operators, nodes, config_.dropout, dropout_rng ? &uniform : nullptr);

  Var merged = merge_mentions(pd.graph, reps, pd.merge);
  Var entities = spmm(pd.entity_average, merged);
  EntityGraph graph = build_entity_graph(tape, entities, pd.adjacency, edge_);
  Var paths = fuse_pair_paths(tape, entities, graph, pairs, config_.hops, attention_);

  std::vector<int> subjects;
  std::vector<int> objects;
  for (const auto& [s, o] : pairs) {
    subjects.push_back(s);
    objects.push_back(o);
  }
  Var features = assemble_features(gather_rows(entities, subjects), gather_rows(entities, objects), paths);
  return mlp_->probabilities(tape, features);
}

Matrix RelationModel::probabilities(const PreparedDocument& doc) const {
  if (doc.candidates.empty()) return Matrix::Zero(0, schema_.size());
  Tape tape(false);
  return forward(tape, doc, doc.candidates).value();
}

double RelationModel::threshold(int relation) const {
  return config_.per_relation_threshold ? relation_thresholds_.at(static_cast<size_t>(relation)) : threshold_;
}

void RelationModel::set_thresholds(double global, std::vector<double> per_relation) {
  if (per_relation.size() != static_cast<size_t>(schema_.size()))
    throw std::invalid_argument("one threshold per relation expected");
  threshold_ = global;
  relation_thresholds_ = std::move(per_relation);
}

Archive RelationModel::to_archive() const {
  Archive a(kArchiveKind);
  a.put_text("config", config_.to_text());
  a.put_strings("schema", schema_.labels());
  a.put_strings("vocabulary", vocab_.words());
  a.put_strings("types", types_.types());
  a.put_text("affinity", affinity_.to_archive().serialize());
  a.put_f64("threshold", threshold_);
  Matrix per(1, schema_.size());
  for (int r = 0; r < schema_.size(); ++r) per(0, r) = relation_thresholds_[static_cast<size_t>(r)];
  a.put_matrix("relation_thresholds", per);
  a.put_u64("steps", steps_);
  for (const Parameter& p : params_.all()) a.put_matrix(kParamPrefix + p.name(), p.value());
  return a;
}

std::unique_ptr<RelationModel> RelationModel::from_archive(const Archive& archive) {
  if (archive.kind() != kArchiveKind)
    throw ArchiveError("expected a " + std::string(kArchiveKind) + " archive, got '" + archive.kind() + "'");
  const PipelineConfig config = PipelineConfig::from_text(archive.text("config"));
  AffinityModel affinity = AffinityModel::from_archive(Archive::parse(archive.text("affinity")));
  auto model = std::make_unique<RelationModel>(config, RelationSchema(archive.strings("schema")),
                                               Vocabulary(archive.strings("vocabulary")),
                                               TypeInventory(archive.strings("types")), std::move(affinity), 0);
  std::vector<std::string> expected;
  for (Parameter& p : model->params_.all()) {
    const Matrix& m = archive.matrix(kParamPrefix + p.name());
    if (m.rows() != p.value().rows() || m.cols() != p.value().cols())
      throw ArchiveError("parameter '" + p.name() + "' has shape " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", config expects " + std::to_string(p.value().rows()) + "x" +
                         std::to_string(p.value().cols()));
    p.value() = m;
    expected.push_back(kParamPrefix + p.name());
  }
  for (const std::string& name : archive.names())
    if (name.starts_with(kParamPrefix) && std::find(expected.begin(), expected.end(), name) == expected.end())
      throw ArchiveError("unexpected parameter '" + name + "' in checkpoint");

  const Matrix& per = archive.matrix("relation_thresholds");
  if (per.rows() != 1 || per.cols() != model->schema_.size())
    throw ArchiveError("relation_thresholds does not match the schema");
  std::vector<double> thresholds(per.data(), per.data() + per.size());
  model->set_thresholds(archive.f64("threshold"), std::move(thresholds));
  model->steps_ = archive.u64("steps");
  return model;
}

void RelationModel::check_architecture(const PipelineConfig& requested) const {
  if (requested.architecture_text() != config_.architecture_text())
    throw ConfigError("checkpoint was trained with a different architecture:\n" + config_.architecture_text());
}

}  // namespace corefdre
