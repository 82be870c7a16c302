#include "corefdre/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace corefdre {

AffinityConfig affinity_config(const PipelineConfig& config) {
  AffinityConfig a;
  a.embed_dim = config.affinity_embed_dim;
  a.hidden_dim = config.affinity_hidden_dim;
  a.context_radius = config.context_radius;
  a.positives = config.affinity_positives;
  a.epochs = config.affinity_epochs;
  a.batch_size = config.affinity_batch_size;
  a.learning_rate = config.affinity_learning_rate;
  a.loss = parse_affinity_loss(config.affinity_loss);
  return a;
}

AffinityModel train_affinity_model(const PipelineConfig& config, const std::vector<Document>& train,
                                   AffinityTrainingLog* log) {
  AffinityConfig a = affinity_config(config);
  const CorpusPairs pairs =
      collect_pairs(train, PronounLexicon::default_lexicon(), HeuristicProvider(config.provider_window));
  a.positives = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(a.positives), pairs.pair_count()));
  if (a.positives == 0) return AffinityModel(AffinityModel::make_vocabulary(train), a, config.seed);
  return train_affinity(train, pairs, a, config.seed, log);
}

std::vector<PreparedDocument> prepare_all(const RelationModel& model, const std::vector<Document>& docs) {
  return prepare_all(model, docs, model.config().theta);
}

std::vector<PreparedDocument> prepare_all(const RelationModel& model, const std::vector<Document>& docs,
                                          double theta) {
  std::vector<PreparedDocument> out;
  out.reserve(docs.size());
  for (const Document& doc : docs) out.push_back(model.prepare(doc, theta));
  return out;
}

namespace {

struct StackedScores {
  Matrix probabilities;  // all candidate rows of all documents
  Matrix gold;
};

StackedScores stack_scores(const RelationModel& model, const std::vector<PreparedDocument>& docs) {
  Eigen::Index rows = 0;
  for (const PreparedDocument& d : docs) rows += static_cast<Eigen::Index>(d.candidates.size());
  const int relations = model.schema().size();
  StackedScores s{Matrix(rows, relations), Matrix(rows, relations)};
  Eigen::Index at = 0;
  for (const PreparedDocument& d : docs) {
    const Eigen::Index n = static_cast<Eigen::Index>(d.candidates.size());
    if (n == 0) continue;
    s.probabilities.middleRows(at, n) = model.probabilities(d);
    s.gold.middleRows(at, n) = d.gold;
    at += n;
  }
  return s;
}

std::set<FactTuple> decide_scores(const RelationModel& model, const std::vector<PreparedDocument>& docs,
                                  const Matrix& probabilities) {
  std::set<FactTuple> out;
  Eigen::Index at = 0;
  for (size_t d = 0; d < docs.size(); ++d) {
    for (const EntityPair& pair : docs[d].candidates) {
      for (int r = 0; r < model.schema().size(); ++r)
        if (probabilities(at, r) >= model.threshold(r))
          out.insert({static_cast<int>(d), pair.first, pair.second, r});
      ++at;
    }
  }
  return out;
}

std::vector<Document> documents_of(const std::vector<PreparedDocument>& docs) {
  std::vector<Document> out;
  out.reserve(docs.size());
  for (const PreparedDocument& d : docs) out.push_back(d.doc);
  return out;
}

double tune_on_scores(RelationModel& model, const std::vector<PreparedDocument>& docs, const StackedScores& s) {
  std::vector<double> probs(s.probabilities.data(), s.probabilities.data() + s.probabilities.size());
  std::vector<char> gold(static_cast<size_t>(s.gold.size()));
  for (Eigen::Index i = 0; i < s.gold.size(); ++i) gold[static_cast<size_t>(i)] = s.gold.data()[i] != 0.0 ? 1 : 0;
  const ThresholdChoice global = select_threshold(probs, gold);
  std::vector<double> per;
  for (const ThresholdChoice& c : select_relation_thresholds(s.probabilities, s.gold)) per.push_back(c.threshold);
  model.set_thresholds(global.threshold, std::move(per));
  const std::set<FactTuple> predicted = decide_scores(model, docs, s.probabilities);
  return score_predictions(documents_of(docs), predicted, model.schema().size(), SharedFactIndex{}).overall.f1;
}

std::vector<Matrix> snapshot(const ParameterStore& store) {
  std::vector<Matrix> out;
  for (const Parameter& p : store.all()) out.push_back(p.value());
  return out;
}

void restore(ParameterStore& store, const std::vector<Matrix>& values) {
  size_t k = 0;
  for (Parameter& p : store.all()) p.value() = values[k++];
}

}  // namespace

double tune_thresholds(RelationModel& model, const std::vector<PreparedDocument>& docs) {
  return tune_on_scores(model, docs, stack_scores(model, docs));
}

std::set<FactTuple> decide(const RelationModel& model, const std::vector<PreparedDocument>& docs) {
  return decide_scores(model, docs, stack_scores(model, docs).probabilities);
}

std::unique_ptr<RelationModel> train_model(const PipelineConfig& config, const RelationSchema& schema,
                                           const std::vector<Document>& train, const std::vector<Document>& dev,
                                           const AffinityModel& affinity, TrainingLog* log, const TrainHooks& hooks) {
  const auto problems = config.validate();
  if (!problems.empty()) throw ConfigError("invalid configuration: " + problems.front());
  for (const auto* split : {&train, &dev})
    for (const Document& doc : *split)
      for (const RelationFact& f : doc.facts)
        if (f.relation_id < 0 || f.relation_id >= schema.size())
          throw ConfigError("document '" + doc.doc_id + "' uses relation id " + std::to_string(f.relation_id) +
                            " outside the schema");

  auto model = RelationModel::create(config, schema, train, affinity);
  const std::vector<PreparedDocument> train_docs = prepare_all(*model, train);
  const std::vector<PreparedDocument> dev_docs = prepare_all(*model, dev);
  const std::vector<PreparedDocument>& selection = dev.empty() ? train_docs : dev_docs;

  AdamW optimizer(AdamWOptions{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  TrainingLog local;
  TrainingLog& history = log != nullptr ? *log : local;
  history = TrainingLog{};

  std::vector<Matrix> best = snapshot(model->params());
  std::uint64_t best_steps = 0;
  double best_f1 = -1.0;
  std::vector<size_t> order(train_docs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int pending = 0;
    for (size_t idx : order) {
      const PreparedDocument& doc = train_docs[idx];
      if (doc.candidates.empty()) continue;
      std::vector<int> positives;
      std::vector<int> negatives;
      for (Eigen::Index r = 0; r < doc.gold.rows(); ++r)
        (doc.gold.row(r).sum() > 0.0 ? positives : negatives).push_back(static_cast<int>(r));
      if (config.negative_ratio >= 0) {
        rng.shuffle(negatives);
        const size_t keep = static_cast<size_t>(config.negative_ratio) * std::max<size_t>(1, positives.size());
        if (negatives.size() > keep) negatives.resize(keep);
      }
      std::vector<int> rows = positives;
      rows.insert(rows.end(), negatives.begin(), negatives.end());
      std::sort(rows.begin(), rows.end());
      std::vector<EntityPair> pairs;
      Matrix gold(static_cast<Eigen::Index>(rows.size()), schema.size());
      for (size_t k = 0; k < rows.size(); ++k) {
        pairs.push_back(doc.candidates[static_cast<size_t>(rows[k])]);
        gold.row(static_cast<Eigen::Index>(k)) = doc.gold.row(rows[k]);
      }

      Tape tape;
      Var loss = relation_loss(model->forward(tape, doc, pairs, &rng), gold);
      if (!std::isfinite(loss.scalar())) throw TrainingError(doc.doc.doc_id, "non-finite training loss");
      tape.backward(loss);
      epoch_loss += loss.scalar();
      if (++pending == config.batch_docs) {
        optimizer.step(model->params());
        pending = 0;
      }
    }
    if (pending > 0) optimizer.step(model->params());
    if (!model->params().all_finite()) throw TrainingError("epoch " + std::to_string(epoch), "parameters diverged");

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss;
    record.dev_f1 = tune_thresholds(*model, selection);
    record.threshold = model->threshold();
    history.epochs.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
    if (record.dev_f1 > best_f1) {
      best_f1 = record.dev_f1;
      best = snapshot(model->params());
      best_steps = static_cast<std::uint64_t>(optimizer.steps());
      history.best_epoch = epoch;
      history.best_dev_f1 = best_f1;
    }
    if (record.dev_f1 >= hooks.stop_at_f1) break;
  }

  restore(model->params(), best);
  model->set_steps(best_steps);
  const double f1 = tune_thresholds(*model, selection);
  if (history.best_epoch == 0) history.best_dev_f1 = f1;
  return model;
}

EvalReport evaluate_prepared(const RelationModel& model, const std::vector<PreparedDocument>& docs,
                             const SharedFactIndex& shared) {
  EvalReport report = score_predictions(documents_of(docs), decide(model, docs), model.schema().size(), shared);
  report.threshold = model.threshold();
  return report;
}

EvalReport evaluate(const RelationModel& model, const std::vector<Document>& docs, const SharedFactIndex& shared) {
  return evaluate_prepared(model, prepare_all(model, docs), shared);
}

std::vector<PredictionRecord> predict(const RelationModel& model, const std::vector<Document>& docs, bool all) {
  std::vector<PredictionRecord> out;
  for (const Document& doc : docs) {
    const PreparedDocument pd = model.prepare(doc);
    const Matrix probs = model.probabilities(pd);
    for (size_t k = 0; k < pd.candidates.size(); ++k) {
      for (int r = 0; r < model.schema().size(); ++r) {
        const double p = probs(static_cast<Eigen::Index>(k), r);
        const bool decision = p >= model.threshold(r);
        if (!decision && !all) continue;
        out.push_back({doc.doc_id, pd.candidates[k].first, pd.candidates[k].second, model.schema().label(r), p,
                       decision});
      }
    }
  }
  return out;
}

std::string prediction_lines(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const PredictionRecord& r : records) {
    nlohmann::ordered_json j;
    j["doc_id"] = r.doc_id;
    j["head"] = r.head;
    j["tail"] = r.tail;
    j["relation"] = r.relation;
    j["probability"] = r.probability;
    j["decision"] = r.decision;
    out += j.dump();
    out += '\n';
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string AblationReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "variant                     median_f1  delta_vs_full  per_seed\n";
  for (const AblationRow& row : rows) {
    out << std::left << std::setw(28) << row.variant << std::right << std::setw(9) << 100.0 * row.median
        << std::setw(15) << 100.0 * row.delta << "  ";
    for (size_t i = 0; i < row.f1.size(); ++i) out << (i ? " " : "") << 100.0 * row.f1[i];
    out << "\n";
  }
  return out.str();
}

AblationReport run_ablation(const PipelineConfig& config, const RelationSchema& schema,
                            const std::vector<Document>& train, const std::vector<Document>& dev,
                            const std::vector<Document>& test, const AffinityModel& affinity,
                            const std::vector<std::uint64_t>& seeds,
                            const std::function<void(const std::string&)>& progress) {
  const std::vector<Document>& held_out = test.empty() ? dev : test;
  const std::vector<std::pair<std::string, std::function<void(PipelineConfig&)>>> variants = {
      {"full", [](PipelineConfig& c) { c.disable_pronoun_nodes = c.unweighted_pronoun_edges = false; }},
      {"disable_pronoun_nodes",
       [](PipelineConfig& c) {
         c.disable_pronoun_nodes = true;
         c.unweighted_pronoun_edges = false;
       }},
      {"unweighted_pronoun_edges",
       [](PipelineConfig& c) {
         c.disable_pronoun_nodes = false;
         c.unweighted_pronoun_edges = true;
       }},
  };
  AblationReport report;
  for (const auto& [name, apply] : variants) {
    AblationRow row;
    row.variant = name;
    for (std::uint64_t seed : seeds) {
      PipelineConfig c = config;
      apply(c);
      c.seed = seed;
      auto model = train_model(c, schema, train, dev, affinity);
      const double f1 = evaluate(*model, held_out, SharedFactIndex{}).f1();
      row.f1.push_back(f1);
      if (progress) {
        std::ostringstream msg;
        msg << name << " seed " << seed << " f1 " << std::fixed << std::setprecision(4) << f1;
        progress(msg.str());
      }
    }
    row.median = median(row.f1);
    report.rows.push_back(std::move(row));
  }
  for (AblationRow& row : report.rows) row.delta = report.rows.front().median - row.median;
  return report;
}

std::vector<ThetaPoint> theta_sweep(const RelationModel& model, const std::vector<Document>& docs,
                                    const SharedFactIndex& shared, const std::vector<double>& thetas) {
  std::vector<ThetaPoint> out;
  for (double theta : thetas) {
    const std::vector<PreparedDocument> prepared = prepare_all(model, docs, theta);
    ThetaPoint point;
    point.theta = theta;
    for (const PreparedDocument& d : prepared) point.participating += participating_pronouns(d.graph, theta);
    const EvalReport report = evaluate_prepared(model, prepared, shared);
    point.f1 = report.f1();
    point.ign_f1 = report.ign_f1();
    out.push_back(point);
  }
  return out;
}

std::string format_theta_sweep(const std::vector<ThetaPoint>& points) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "theta   links  f1      ign_f1\n";
  for (const ThetaPoint& p : points)
    out << std::setprecision(2) << p.theta << "  " << std::setw(6) << p.participating << "  " << std::setprecision(4)
        << p.f1 << "  " << p.ign_f1 << "\n";
  return out.str();
}

}  // namespace corefdre
