// Training, evaluation, prediction, ablation and the theta sweep.
#pragma once

#include "corefdre/affinity.hpp"
#include "corefdre/config.hpp"
#include "corefdre/metrics.hpp"
#include "corefdre/model.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace corefdre {

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::string doc_id, const std::string& message)
      : std::runtime_error(message + " (document '" + doc_id + "')"), doc_id_(std::move(doc_id)) {}
  const std::string& doc_id() const { return doc_id_; }

 private:
  std::string doc_id_;
};

AffinityConfig affinity_config(const PipelineConfig& config);

// Trains the affinity scorer on provider pairs of `train`. Asks for at most
// as many positives as the corpus offers.
AffinityModel train_affinity_model(const PipelineConfig& config, const std::vector<Document>& train,
                                   AffinityTrainingLog* log = nullptr);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_f1 = 0.0;
  double threshold = 0.5;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0: the initial parameters were kept
  double best_dev_f1 = 0.0;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Stop as soon as the selection F1 reaches this value.
  double stop_at_f1 = std::numeric_limits<double>::infinity();
};

// Minimises the summed relation loss with AdamW and returns the parameters of
// the epoch with the best selection F1 (on `dev`, or on `train` when `dev` is
// empty), with decision thresholds tuned on the same split.
std::unique_ptr<RelationModel> train_model(const PipelineConfig& config, const RelationSchema& schema,
                                           const std::vector<Document>& train, const std::vector<Document>& dev,
                                           const AffinityModel& affinity, TrainingLog* log = nullptr,
                                           const TrainHooks& hooks = {});

std::vector<PreparedDocument> prepare_all(const RelationModel& model, const std::vector<Document>& docs);
std::vector<PreparedDocument> prepare_all(const RelationModel& model, const std::vector<Document>& docs,
                                          double theta);

// Thresholds chosen on `docs`, installed in the model; returns the F1 there.
double tune_thresholds(RelationModel& model, const std::vector<PreparedDocument>& docs);

std::set<FactTuple> decide(const RelationModel& model, const std::vector<PreparedDocument>& docs);

EvalReport evaluate(const RelationModel& model, const std::vector<Document>& docs, const SharedFactIndex& shared);
EvalReport evaluate_prepared(const RelationModel& model, const std::vector<PreparedDocument>& docs,
                             const SharedFactIndex& shared);

struct PredictionRecord {
  std::string doc_id;
  int head = 0;
  int tail = 0;
  std::string relation;
  double probability = 0.0;
  bool decision = false;
};

// Records above threshold, or every (pair, relation) cell with `all`.
std::vector<PredictionRecord> predict(const RelationModel& model, const std::vector<Document>& docs, bool all = false);
std::string prediction_lines(const std::vector<PredictionRecord>& records);

struct AblationRow {
  std::string variant;
  std::vector<double> f1;  // one per seed
  double median = 0.0;
  double delta = 0.0;  // full median minus this median
};

struct AblationReport {
  std::vector<AblationRow> rows;  // full, disable_pronoun_nodes, unweighted_pronoun_edges
  std::string to_text() const;
};

// Trains each variant under every seed and scores it on `test` (or on `dev`
// when `test` is empty).
AblationReport run_ablation(const PipelineConfig& config, const RelationSchema& schema,
                            const std::vector<Document>& train, const std::vector<Document>& dev,
                            const std::vector<Document>& test, const AffinityModel& affinity,
                            const std::vector<std::uint64_t>& seeds,
                            const std::function<void(const std::string&)>& progress = {});

struct ThetaPoint {
  double theta = 0.0;
  int participating = 0;  // links passing the gate, summed over documents
  double f1 = 0.0;
  double ign_f1 = 0.0;
};

// Re-scores a trained model with the merge gate moved to each theta.
std::vector<ThetaPoint> theta_sweep(const RelationModel& model, const std::vector<Document>& docs,
                                    const SharedFactIndex& shared, const std::vector<double>& thetas);
std::string format_theta_sweep(const std::vector<ThetaPoint>& points);

double median(std::vector<double> values);

}  // namespace corefdre
