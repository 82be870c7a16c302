#include "corefdre/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace corefdre {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

struct Field {
  std::string key;
  std::string help;
  bool architecture;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

Field int_field(std::string key, int PipelineConfig::*member, bool arch, std::string help) {
  return Field{key, std::move(help), arch,
               [member](const PipelineConfig& c) { return std::to_string(c.*member); },
               [member, key](PipelineConfig& c, const std::string& v) {
                 const long long x = parse_int(key, v);
                 if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
                   throw ConfigError(key + ": out of range");
                 c.*member = static_cast<int>(x);
               }};
}

Field double_field(std::string key, double PipelineConfig::*member, bool arch, std::string help) {
  return Field{key, std::move(help), arch, [member](const PipelineConfig& c) { return format_double(c.*member); },
               [member, key](PipelineConfig& c, const std::string& v) { c.*member = parse_double(key, v); }};
}

Field bool_field(std::string key, bool PipelineConfig::*member, bool arch, std::string help) {
  return Field{key, std::move(help), arch,
               [member](const PipelineConfig& c) { return std::string(c.*member ? "true" : "false"); },
               [member, key](PipelineConfig& c, const std::string& v) { c.*member = parse_bool(key, v); }};
}

Field string_field(std::string key, std::string PipelineConfig::*member, bool arch, std::string help) {
  return Field{key, std::move(help), arch, [member](const PipelineConfig& c) { return c.*member; },
               [member](PipelineConfig& c, const std::string& v) { c.*member = v; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(Field{"encoder", "contextual encoder: birnn or identity", true,
                      [](const PipelineConfig& c) { return to_string(c.encoder); },
                      [](PipelineConfig& c, const std::string& v) {
                        if (v == "birnn") {
                          c.encoder = EncoderKind::kBiRnn;
                        } else if (v == "identity") {
                          c.encoder = EncoderKind::kIdentity;
                        } else {
                          throw ConfigError("encoder: expected birnn or identity, got '" + v + "'");
                        }
                      }});
    f.push_back(int_field("word_dim", &PipelineConfig::word_dim, true, "word embedding width"));
    f.push_back(int_field("type_dim", &PipelineConfig::type_dim, true, "entity-type embedding width"));
    f.push_back(int_field("id_dim", &PipelineConfig::id_dim, true, "entity-id embedding width"));
    f.push_back(int_field("hidden_dim", &PipelineConfig::hidden_dim, true, "encoder output width (even for birnn)"));
    f.push_back(int_field("node_type_dim", &PipelineConfig::node_type_dim, true, "mention/pronoun type vector width"));
    f.push_back(int_field("max_entities", &PipelineConfig::max_entities, true, "entity-id table size"));
    f.push_back(string_field("word_vectors", &PipelineConfig::word_vectors, false, "pretrained word vector file"));
    f.push_back(int_field("gcn_layers", &PipelineConfig::gcn_layers, true, "heterogeneous GCN layers"));
    f.push_back(Field{"gcn_norm", "neighbour normalisation: per_kind or all_kinds", true,
                      [](const PipelineConfig& c) { return to_string(c.gcn_norm); },
                      [](PipelineConfig& c, const std::string& v) {
                        if (v == "per_kind") {
                          c.gcn_norm = NeighborNorm::kPerKind;
                        } else if (v == "all_kinds") {
                          c.gcn_norm = NeighborNorm::kAllKinds;
                        } else {
                          throw ConfigError("gcn_norm: expected per_kind or all_kinds, got '" + v + "'");
                        }
                      }});
    f.push_back(double_field("dropout", &PipelineConfig::dropout, false, "GCN dropout rate"));
    f.push_back(double_field("theta", &PipelineConfig::theta, false, "affinity threshold for pronoun merging"));
    f.push_back(int_field("hops", &PipelineConfig::hops, true, "path length between entity pairs"));
    f.push_back(int_field("edge_dim", &PipelineConfig::edge_dim, true, "entity-graph edge vector width"));
    f.push_back(int_field("mlp_hidden", &PipelineConfig::mlp_hidden, true, "classifier hidden width (0: half input)"));
    f.push_back(bool_field("disable_pronoun_nodes", &PipelineConfig::disable_pronoun_nodes, true,
                           "ablation: drop pronoun nodes"));
    f.push_back(bool_field("unweighted_pronoun_edges", &PipelineConfig::unweighted_pronoun_edges, true,
                           "ablation: force mention-pronoun weights to 1"));
    f.push_back(double_field("learning_rate", &PipelineConfig::learning_rate, false, "AdamW learning rate"));
    f.push_back(double_field("weight_decay", &PipelineConfig::weight_decay, false, "AdamW decoupled weight decay"));
    f.push_back(int_field("epochs", &PipelineConfig::epochs, false, "relation-model epochs"));
    f.push_back(int_field("batch_docs", &PipelineConfig::batch_docs, false, "documents per optimiser step"));
    f.push_back(int_field("negative_ratio", &PipelineConfig::negative_ratio, false,
                          "negative pairs per positive pair (<0: all)"));
    f.push_back(bool_field("per_relation_threshold", &PipelineConfig::per_relation_threshold, false,
                           "tune one decision threshold per relation"));
    f.push_back(Field{"seed", "random seed", false, [](const PipelineConfig& c) { return std::to_string(c.seed); },
                      [](PipelineConfig& c, const std::string& v) {
                        const long long x = parse_int("seed", v);
                        if (x < 0) throw ConfigError("seed: must be non-negative");
                        c.seed = static_cast<std::uint64_t>(x);
                      }});
    f.push_back(int_field("provider_window", &PipelineConfig::provider_window, false,
                          "heuristic coreference window in sentences"));
    f.push_back(int_field("context_radius", &PipelineConfig::context_radius, false, "affinity input context radius"));
    f.push_back(int_field("affinity_embed_dim", &PipelineConfig::affinity_embed_dim, false, "affinity token width"));
    f.push_back(int_field("affinity_hidden_dim", &PipelineConfig::affinity_hidden_dim, false, "affinity hidden width"));
    f.push_back(int_field("affinity_positives", &PipelineConfig::affinity_positives, false,
                          "positive pairs sampled for affinity training"));
    f.push_back(int_field("affinity_epochs", &PipelineConfig::affinity_epochs, false, "affinity training epochs"));
    f.push_back(int_field("affinity_batch_size", &PipelineConfig::affinity_batch_size, false,
                          "affinity minibatch size"));
    f.push_back(double_field("affinity_learning_rate", &PipelineConfig::affinity_learning_rate, false,
                             "affinity learning rate"));
    f.push_back(string_field("affinity_loss", &PipelineConfig::affinity_loss, false,
                             "squared_contrastive or hinge_squared"));
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const Field& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::string to_string(EncoderKind kind) { return kind == EncoderKind::kBiRnn ? "birnn" : "identity"; }
std::string to_string(NeighborNorm norm) { return norm == NeighborNorm::kPerKind ? "per_kind" : "all_kinds"; }

void PipelineConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, value); }
std::string PipelineConfig::get(const std::string& key) const { return field(key).get(*this); }

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

std::string PipelineConfig::architecture_text() const {
  std::string out;
  for (const Field& f : fields())
    if (f.architecture) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> PipelineConfig::validate() const {
  std::vector<std::string> v;
  auto positive = [&](const char* key, int x) {
    if (x <= 0) v.push_back(std::string(key) + " must be positive");
  };
  positive("word_dim", word_dim);
  positive("type_dim", type_dim);
  positive("id_dim", id_dim);
  positive("hidden_dim", hidden_dim);
  positive("node_type_dim", node_type_dim);
  positive("max_entities", max_entities);
  positive("edge_dim", edge_dim);
  positive("batch_docs", batch_docs);
  positive("provider_window", provider_window);
  positive("affinity_embed_dim", affinity_embed_dim);
  positive("affinity_hidden_dim", affinity_hidden_dim);
  positive("affinity_positives", affinity_positives);
  positive("affinity_batch_size", affinity_batch_size);
  if (encoder == EncoderKind::kBiRnn && hidden_dim % 2 != 0) v.push_back("hidden_dim must be even for birnn");
  if (gcn_layers < 0) v.push_back("gcn_layers must be >= 0");
  if (hops < 1) v.push_back("hops must be >= 1");
  if (mlp_hidden < 0) v.push_back("mlp_hidden must be >= 0");
  if (epochs < 0) v.push_back("epochs must be >= 0");
  if (affinity_epochs < 0) v.push_back("affinity_epochs must be >= 0");
  if (context_radius < 0) v.push_back("context_radius must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) v.push_back("dropout must be in [0, 1)");
  if (!(theta >= 0.0 && theta <= 1.0)) v.push_back("theta must be in [0, 1]");
  if (!(learning_rate > 0.0)) v.push_back("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) v.push_back("weight_decay must be >= 0");
  if (!(affinity_learning_rate > 0.0)) v.push_back("affinity_learning_rate must be positive");
  if (affinity_loss != "squared_contrastive" && affinity_loss != "hinge_squared")
    v.push_back("affinity_loss must be squared_contrastive or hinge_squared");
  return v;
}

PipelineConfig PipelineConfig::from_text(const std::string& text) {
  PipelineConfig config;
  for (const auto& [key, value] : parse_key_values(text)) config.set(key, value);
  return config;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return from_text(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const Field& f : fields()) out.push_back(f.key);
    return out;
  }();
  return k;
}

std::string PipelineConfig::help(const std::string& key) { return field(key).help; }

}  // namespace corefdre
