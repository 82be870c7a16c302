// corefdre command-line tool.
//
// Exit status: 0 success, 1 invalid input (flags, config, corpus, checkpoint),
// 2 runtime failure. Relative data paths are resolved against $CDRE_DATA_ROOT
// when it is set.

#include "corefdre/affinity.hpp"
#include "corefdre/archive.hpp"
#include "corefdre/config.hpp"
#include "corefdre/corpus.hpp"
#include "corefdre/encoding.hpp"
#include "corefdre/mpag.hpp"
#include "corefdre/pipeline.hpp"
#include "corefdre/synthetic.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace corefdre;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailure = 2;

// Errors caused by the user's inputs rather than by the run itself.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path data_path(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("CDRE_DATA_ROOT"); root != nullptr && *root != '\0') return fs::path(root) / path;
  return path;
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// A config file plus `--<key> value` overrides for every PipelineConfig key.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void attach(CLI::App& app) {
    app.add_option("--config", file, "key = value configuration file");
    for (const std::string& key : PipelineConfig::keys()) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      app.add_option("--" + flag, values[key], PipelineConfig::help(key));
    }
  }

  PipelineConfig resolve() const {
    PipelineConfig config = file.empty() ? PipelineConfig{} : PipelineConfig::load(data_path(file));
    for (const std::string& key : PipelineConfig::keys()) {
      auto it = values.find(key);
      if (it != values.end() && !it->second.empty()) config.set(key, it->second);
    }
    const auto problems = config.validate();
    if (!problems.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& p : problems) msg += "\n  " + p;
      throw ConfigError(msg);
    }
    return config;
  }
};

std::vector<Document> load_split(const std::string& path, const RelationSchema& schema) {
  if (path.empty()) return {};
  return load_corpus(data_path(path), schema);
}

AffinityModel obtain_affinity(const std::string& path, const PipelineConfig& config,
                              const std::vector<Document>& train) {
  if (!path.empty()) return AffinityModel::from_archive(Archive::load(data_path(path)));
  std::cerr << "training affinity scorer on " << train.size() << " documents\n";
  return train_affinity_model(config, train);
}

// ---- subcommands ------------------------------------------------------------

struct GenSyntheticArgs {
  std::string out = "synthetic";
  int train = 30;
  int dev = 20;
  int test = 40;
  std::uint64_t seed = 7;
  double pronoun_rate = 0.7;
  double noise_rate = 0.35;
  double mislink_rate = 0.0;
};

int run_gen_synthetic(const GenSyntheticArgs& a) {
  const fs::path dir = data_path(a.out);
  const RelationSchema schema = synthetic_schema();
  write_file(dir / "schema.json", serialize_schema(schema));
  const std::vector<std::pair<std::string, int>> splits = {{"train", a.train}, {"dev", a.dev}, {"test", a.test}};
  std::uint64_t seed = a.seed;
  for (const auto& [name, count] : splits) {
    SyntheticOptions options;
    options.documents = count;
    options.seed = seed++;
    options.pronoun_rate = a.pronoun_rate;
    options.noise_rate = a.noise_rate;
    options.mislink_rate = a.mislink_rate;
    const auto docs = generate_synthetic(options);
    write_file(dir / (name + ".json"), serialize_corpus(docs, schema));
    std::cout << name << ": " << docs.size() << " documents, " << std::fixed << std::setprecision(2)
              << 100.0 * pronoun_only_fraction(docs) << "% pronoun-only facts\n";
  }
  return kOk;
}

struct CorpusArgs {
  std::string train;
  std::string dev;
  std::string test;
  std::string schema;
  std::string affinity;
  std::string out;
};

int run_coref_train(const CorpusArgs& a, const ConfigFlags& flags) {
  const PipelineConfig config = flags.resolve();
  const RelationSchema schema = RelationSchema::load(data_path(a.schema));
  const auto train = load_split(a.train, schema);
  AffinityTrainingLog log;
  const AffinityModel model = train_affinity_model(config, train, &log);
  for (size_t e = 0; e < log.epoch_loss.size(); ++e)
    std::cout << "epoch " << e << " loss " << log.epoch_loss[e] << "\n";
  std::cout << "mean affinity positive " << log.mean_positive << " negative " << log.mean_negative << "\n";
  model.to_archive().save(data_path(a.out));
  std::cout << "saved " << a.out << "\n";
  return kOk;
}

int run_train(const CorpusArgs& a, const ConfigFlags& flags) {
  const PipelineConfig config = flags.resolve();
  const RelationSchema schema = RelationSchema::load(data_path(a.schema));
  const auto train = load_split(a.train, schema);
  const auto dev = load_split(a.dev, schema);
  const AffinityModel affinity = obtain_affinity(a.affinity, config, train);
  TrainHooks hooks;
  hooks.on_epoch = [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " loss " << std::fixed << std::setprecision(4) << r.train_loss << " dev_f1 "
              << r.dev_f1 << " threshold " << r.threshold << std::endl;
  };
  TrainingLog log;
  auto model = train_model(config, schema, train, dev, affinity, &log, hooks);
  model->to_archive().save(data_path(a.out));
  std::cout << "best epoch " << log.best_epoch << " dev_f1 " << log.best_dev_f1 << "; saved " << a.out << "\n";
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string schema;
  std::string shared_train;
  std::string out;
  std::string config;
  bool all = false;
  bool theta_sweep = false;
};

std::unique_ptr<RelationModel> load_checkpoint(const EvalArgs& a) {
  auto model = RelationModel::from_archive(Archive::load(data_path(a.checkpoint)));
  if (!a.schema.empty() && !(RelationSchema::load(data_path(a.schema)) == model->schema()))
    throw InputError("relation schema " + a.schema + " differs from the checkpoint's schema");
  if (!a.config.empty()) model->check_architecture(PipelineConfig::load(data_path(a.config)));
  return model;
}

int run_eval(const EvalArgs& a) {
  auto model = load_checkpoint(a);
  const auto docs = load_split(a.data, model->schema());
  SharedFactIndex shared;
  if (!a.shared_train.empty()) shared = build_shared_fact_index(load_split(a.shared_train, model->schema()));
  const EvalReport report = evaluate(*model, docs, shared);
  std::cout << format_report(report, model->schema());
  if (a.theta_sweep) {
    std::vector<double> thetas;
    for (int k = 0; k <= 10; ++k) thetas.push_back(k / 10.0);
    std::cout << "\n" << format_theta_sweep(theta_sweep(*model, docs, shared, thetas));
  }
  return kOk;
}

int run_predict(const EvalArgs& a) {
  auto model = load_checkpoint(a);
  const auto docs = load_split(a.data, model->schema());
  const std::string lines = prediction_lines(predict(*model, docs, a.all));
  if (a.out.empty() || a.out == "-") std::cout << lines;
  else write_file(data_path(a.out), lines);
  return kOk;
}

int run_ablate(const CorpusArgs& a, const ConfigFlags& flags, const std::vector<std::uint64_t>& seeds) {
  const PipelineConfig config = flags.resolve();
  const RelationSchema schema = RelationSchema::load(data_path(a.schema));
  const auto train = load_split(a.train, schema);
  const auto dev = load_split(a.dev, schema);
  const auto test = load_split(a.test, schema);
  const AffinityModel affinity = obtain_affinity(a.affinity, config, train);
  const AblationReport report = run_ablation(config, schema, train, dev, test, affinity, seeds,
                                             [](const std::string& msg) { std::cerr << msg << std::endl; });
  std::cout << report.to_text();
  return kOk;
}

struct InspectArgs {
  std::string data;
  std::string schema;
  std::string checkpoint;
  std::string affinity;
  std::string doc;
};

int run_inspect_graph(const InspectArgs& a, const ConfigFlags& flags) {
  std::unique_ptr<RelationModel> model;
  PipelineConfig config = flags.resolve();
  RelationSchema schema;
  if (!a.checkpoint.empty()) {
    model = RelationModel::from_archive(Archive::load(data_path(a.checkpoint)));
    schema = model->schema();
    config = model->config();
  } else {
    schema = RelationSchema::load(data_path(a.schema));
  }
  const auto docs = load_split(a.data, schema);
  std::optional<AffinityModel> affinity;
  if (model) affinity = model->affinity();
  else if (!a.affinity.empty()) affinity = AffinityModel::from_archive(Archive::load(data_path(a.affinity)));

  bool found = false;
  for (const Document& doc : docs) {
    if (!a.doc.empty() && doc.doc_id != a.doc) continue;
    found = true;
    const auto pronouns = detect_pronouns(doc, PronounLexicon::default_lexicon());
    auto pairs = propose_pairs(doc, pronouns, HeuristicProvider(config.provider_window));
    if (affinity) affinity->annotate(doc, pronouns, pairs);
    else
      for (auto& p : pairs) p.affinity = 1.0;
    const Mpag graph =
        build_mpag(doc, pronouns, pairs, MpagOptions{config.disable_pronoun_nodes, config.unweighted_pronoun_edges});
    std::cout << graph.to_json(doc, pronouns);
  }
  if (!a.doc.empty() && !found) throw InputError("no document with id '" + a.doc + "'");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coreference-aware document-level relation extraction"};
  app.require_subcommand(1);

  GenSyntheticArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic train/dev/test corpus and schema");
  gen_cmd->add_option("--out", gen.out, "output directory")->capture_default_str();
  gen_cmd->add_option("--train-docs", gen.train, "training documents")->capture_default_str();
  gen_cmd->add_option("--dev-docs", gen.dev, "development documents")->capture_default_str();
  gen_cmd->add_option("--test-docs", gen.test, "test documents")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "generator seed (dev and test use seed+1, seed+2)")->capture_default_str();
  gen_cmd->add_option("--pronoun-rate", gen.pronoun_rate, "share of facts stated through a pronoun")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen_cmd->add_option("--noise-rate", gen.noise_rate, "distractor sentence rate")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen_cmd->add_option("--mislink-rate", gen.mislink_rate,
                      "share of person pronoun facts preceded by a misleading other-gender name")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  CorpusArgs corpus;
  ConfigFlags coref_flags;
  auto* coref_cmd = app.add_subcommand("coref-train", "Train the mention-pronoun affinity scorer");
  coref_cmd->add_option("--train", corpus.train, "training corpus (JSON)")->required();
  coref_cmd->add_option("--schema", corpus.schema, "relation schema (JSON list)")->required();
  coref_cmd->add_option("--out", corpus.out, "output archive")->required();
  coref_flags.attach(*coref_cmd);

  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train the relation model");
  train_cmd->add_option("--train", corpus.train, "training corpus (JSON)")->required();
  train_cmd->add_option("--dev", corpus.dev, "development corpus (JSON)");
  train_cmd->add_option("--schema", corpus.schema, "relation schema (JSON list)")->required();
  train_cmd->add_option("--affinity", corpus.affinity, "pretrained affinity archive (trained here when omitted)");
  train_cmd->add_option("--out", corpus.out, "output checkpoint")->required();
  train_flags.attach(*train_cmd);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a corpus");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "relation model checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "corpus to score (JSON)")->required();
  eval_cmd->add_option("--schema", eval.schema, "schema the corpus is expected to use");
  eval_cmd->add_option("--shared-train", eval.shared_train, "training corpus whose facts Ign F1 excludes");
  eval_cmd->add_option("--config", eval.config, "configuration the checkpoint must match");
  eval_cmd->add_flag("--theta-sweep", eval.theta_sweep, "also re-score over theta = 0, 0.1, ..., 1");

  auto* predict_cmd = app.add_subcommand("predict", "Write JSON-lines predictions");
  predict_cmd->add_option("--checkpoint", eval.checkpoint, "relation model checkpoint")->required();
  predict_cmd->add_option("--data", eval.data, "documents (JSON)")->required();
  predict_cmd->add_option("--schema", eval.schema, "schema the corpus is expected to use");
  predict_cmd->add_option("--config", eval.config, "configuration the checkpoint must match");
  predict_cmd->add_option("--out", eval.out, "output file ('-' for stdout)");
  predict_cmd->add_flag("--all", eval.all, "write every (pair, relation) cell, not only positive decisions");

  ConfigFlags ablate_flags;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare the full model with its pronoun ablations");
  ablate_cmd->add_option("--train", corpus.train, "training corpus (JSON)")->required();
  ablate_cmd->add_option("--dev", corpus.dev, "development corpus (JSON)")->required();
  ablate_cmd->add_option("--test", corpus.test, "held-out corpus (JSON); dev is used when omitted");
  ablate_cmd->add_option("--schema", corpus.schema, "relation schema (JSON list)")->required();
  ablate_cmd->add_option("--affinity", corpus.affinity, "pretrained affinity archive");
  ablate_cmd->add_option("--seeds", seeds, "training seeds")->delimiter(',')->capture_default_str();
  ablate_flags.attach(*ablate_cmd);

  InspectArgs inspect;
  ConfigFlags inspect_flags;
  auto* inspect_cmd = app.add_subcommand("inspect-graph", "Dump mention-pronoun graphs as JSON");
  inspect_cmd->add_option("--data", inspect.data, "corpus (JSON)")->required();
  inspect_cmd->add_option("--schema", inspect.schema, "relation schema (JSON list)");
  inspect_cmd->add_option("--checkpoint", inspect.checkpoint, "take config and affinities from a checkpoint");
  inspect_cmd->add_option("--affinity", inspect.affinity, "affinity archive (affinities are 1 without one)");
  inspect_cmd->add_option("--doc", inspect.doc, "only this doc_id");
  inspect_flags.attach(*inspect_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*gen_cmd) return run_gen_synthetic(gen);
    if (*coref_cmd) return run_coref_train(corpus, coref_flags);
    if (*train_cmd) return run_train(corpus, train_flags);
    if (*eval_cmd) return run_eval(eval);
    if (*predict_cmd) return run_predict(eval);
    if (*ablate_cmd) return run_ablate(corpus, ablate_flags, seeds);
    if (*inspect_cmd) {
      if (inspect.checkpoint.empty() && inspect.schema.empty())
        throw InputError("inspect-graph needs --schema or --checkpoint");
      return run_inspect_graph(inspect, inspect_flags);
    }
  } catch (const CorpusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ArchiveError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const EncodingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
