// Pipeline configuration and its key-value text format.
//
// The text format is one `key = value` pair per line. Blank lines and lines
// starting with '#' are ignored; booleans are true/false. Unknown keys are an
// error. to_text() writes every key in a fixed order so that the output can be
// diffed and echoed into checkpoints.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace corefdre {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered key/value pairs; later duplicates override earlier ones.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

enum class EncoderKind { kBiRnn, kIdentity };
enum class NeighborNorm { kPerKind, kAllKinds };

std::string to_string(EncoderKind kind);
std::string to_string(NeighborNorm norm);

struct PipelineConfig {
  // encoding
  EncoderKind encoder = EncoderKind::kBiRnn;
  int word_dim = 64;
  int type_dim = 16;
  int id_dim = 16;
  int hidden_dim = 128;
  int node_type_dim = 16;
  int max_entities = 64;
  std::string word_vectors;  // optional pretrained text vectors

  // graph
  int gcn_layers = 2;
  NeighborNorm gcn_norm = NeighborNorm::kPerKind;
  double dropout = 0.6;
  double theta = 0.5;
  int hops = 2;
  int edge_dim = 64;
  int mlp_hidden = 0;  // 0: half the pair-feature width
  bool disable_pronoun_nodes = false;
  bool unweighted_pronoun_edges = false;

  // training
  double learning_rate = 0.001;
  double weight_decay = 0.01;
  int epochs = 30;
  int batch_docs = 1;  // documents per optimiser step
  int negative_ratio = 3;  // negative pairs per positive pair; < 0 keeps all
  bool per_relation_threshold = false;
  std::uint64_t seed = 1;

  // coreference / affinity
  int provider_window = 3;
  int context_radius = 10;
  int affinity_embed_dim = 32;
  int affinity_hidden_dim = 32;
  int affinity_positives = 300;
  int affinity_epochs = 30;
  int affinity_batch_size = 32;
  double affinity_learning_rate = 0.003;
  std::string affinity_loss = "squared_contrastive";

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  std::string to_text() const;
  // Only the keys that determine parameter shapes and forward semantics.
  std::string architecture_text() const;
  std::vector<std::string> validate() const;

  static PipelineConfig from_text(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);
  static const std::vector<std::string>& keys();
  static std::string help(const std::string& key);

  bool operator==(const PipelineConfig& other) const { return to_text() == other.to_text(); }
};

}  // namespace corefdre
