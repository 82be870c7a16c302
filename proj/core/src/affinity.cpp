#include "corefdre/affinity.hpp"

#include "corefdre/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace corefdre {

std::string to_string(AffinityLoss loss) {
  return loss == AffinityLoss::kSquaredContrastive ? "squared_contrastive" : "hinge_squared";
}

AffinityLoss parse_affinity_loss(const std::string& name) {
  if (name == "squared_contrastive") return AffinityLoss::kSquaredContrastive;
  if (name == "hinge_squared") return AffinityLoss::kHingeSquared;
  throw ConfigError("unknown affinity loss '" + name + "'");
}

std::string AffinityConfig::to_text() const {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << "embed_dim = " << embed_dim << "\n"
     << "hidden_dim = " << hidden_dim << "\n"
     << "context_radius = " << context_radius << "\n"
     << "positives = " << positives << "\n"
     << "epochs = " << epochs << "\n"
     << "batch_size = " << batch_size << "\n"
     << "learning_rate = " << learning_rate << "\n"
     << "loss = " << corefdre::to_string(loss) << "\n";
  return os.str();
}

AffinityConfig AffinityConfig::from_text(const std::string& text) {
  AffinityConfig c;
  for (const auto& [key, value] : parse_key_values(text)) {
    try {
      if (key == "embed_dim") {
        c.embed_dim = std::stoi(value);
      } else if (key == "hidden_dim") {
        c.hidden_dim = std::stoi(value);
      } else if (key == "context_radius") {
        c.context_radius = std::stoi(value);
      } else if (key == "positives") {
        c.positives = std::stoi(value);
      } else if (key == "epochs") {
        c.epochs = std::stoi(value);
      } else if (key == "batch_size") {
        c.batch_size = std::stoi(value);
      } else if (key == "learning_rate") {
        c.learning_rate = std::stod(value);
      } else if (key == "loss") {
        c.loss = parse_affinity_loss(value);
      } else {
        throw ConfigError("unknown affinity config key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("affinity config: bad value for '" + key + "'");
    }
  }
  return c;
}

std::size_t CorpusPairs::pair_count() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.size();
  return n;
}

CorpusPairs collect_pairs(const std::vector<Document>& corpus, const PronounLexicon& lexicon,
                          const CorefProvider& provider) {
  CorpusPairs out;
  for (const Document& doc : corpus) {
    out.pronouns.push_back(detect_pronouns(doc, lexicon));
    out.pairs.push_back(propose_pairs(doc, out.pronouns.back(), provider));
  }
  return out;
}

std::vector<PairSample> sample_training_pairs(const std::vector<Document>& corpus, const CorpusPairs& pairs,
                                              int positives, std::uint64_t seed) {
  struct Candidate {
    int doc;
    int pair;
  };
  std::vector<Candidate> pool;
  for (size_t d = 0; d < pairs.pairs.size(); ++d) {
    const Document& doc = corpus.at(d);
    const bool has_other_doc_mention = [&] {
      for (size_t o = 0; o < corpus.size(); ++o)
        if (o != d && corpus[o].mention_count() > 0) return true;
      return false;
    }();
    for (size_t p = 0; p < pairs.pairs[d].size(); ++p) {
      // A negative needs some other mention: another entity here or any
      // mention elsewhere.
      if (doc.entities.size() < 2 && !has_other_doc_mention) continue;
      pool.push_back(Candidate{static_cast<int>(d), static_cast<int>(p)});
    }
  }
  if (positives < 0 || static_cast<std::size_t>(positives) > pool.size())
    throw SamplingError("requested " + std::to_string(positives) + " positive pairs but only " +
                        std::to_string(pool.size()) + " are available");

  Rng rng(seed);
  rng.shuffle(pool);
  pool.resize(static_cast<std::size_t>(positives));

  std::vector<PairSample> out;
  out.reserve(pool.size());
  for (const Candidate& c : pool) {
    const Document& doc = corpus[static_cast<size_t>(c.doc)];
    const MentionPronounPair& pair = pairs.pairs[static_cast<size_t>(c.doc)][static_cast<size_t>(c.pair)];
    PairSample s;
    s.doc = c.doc;
    s.pronoun = pair.pronoun;
    s.positive = pair.mention;

    std::vector<MentionRef> local;
    for (const MentionRef& ref : all_mentions(doc))
      if (ref.entity != pair.mention.entity) local.push_back(ref);
    if (!local.empty()) {
      s.negative_doc = c.doc;
      s.negative = local[rng.index(local.size())];
    } else {
      std::vector<std::pair<int, MentionRef>> foreign;
      for (size_t o = 0; o < corpus.size(); ++o) {
        if (static_cast<int>(o) == c.doc) continue;
        for (const MentionRef& ref : all_mentions(corpus[o])) foreign.emplace_back(static_cast<int>(o), ref);
      }
      const auto& pick = foreign[rng.index(foreign.size())];
      s.negative_doc = pick.first;
      s.negative = pick.second;
    }
    out.push_back(s);
  }
  return out;
}

// ---- model -------------------------------------------------------------------

Vocabulary AffinityModel::make_vocabulary(const std::vector<Document>& corpus) {
  return Vocabulary::build(corpus, {kClsToken, kSepToken, kStartToken, kEndToken});
}

AffinityModel::AffinityModel(Vocabulary vocab, AffinityConfig config, std::uint64_t seed)
    : vocab_(std::move(vocab)), config_(config) {
  Rng rng(seed);
  params_.add("affinity.embeddings", vocab_.size(), config_.embed_dim, Init::kNormalSmall, rng);
  params_.add("affinity.encoder.weight", 3 * config_.embed_dim, config_.hidden_dim, Init::kXavierUniform, rng);
  params_.add("affinity.encoder.bias", 1, config_.hidden_dim, Init::kZero, rng);
  params_.add("affinity.head.weight", config_.hidden_dim, 1, Init::kXavierUniform, rng);
  params_.add("affinity.head.bias", 1, 1, Init::kZero, rng);
}

AffinityModel::AffinityModel(Vocabulary vocab, AffinityConfig config, ParameterStore params)
    : vocab_(std::move(vocab)), config_(config), params_(std::move(params)) {}

namespace {

// Averaging operator over the tokens selected by `pick(sequence, position)`.
// Empty selections give a zero row.
template <typename Pick>
SparseMatrix averaging_operator(std::span<const std::vector<std::string>> sequences, const Vocabulary& vocab,
                                Pick pick) {
  SparseMatrix op(static_cast<Eigen::Index>(sequences.size()), vocab.size());
  std::vector<Eigen::Triplet<double>> entries;
  for (size_t i = 0; i < sequences.size(); ++i) {
    std::vector<int> ids;
    for (size_t k = 0; k < sequences[i].size(); ++k)
      if (pick(i, k)) ids.push_back(vocab.id(sequences[i][k]));
    for (int id : ids) entries.emplace_back(static_cast<int>(i), id, 1.0 / static_cast<double>(ids.size()));
  }
  op.setFromTriplets(entries.begin(), entries.end());
  return op;
}

// Position of every token relative to the marked spans: 0 outside, 1 inside
// the first [START] ... [END], 2 inside the second.
std::vector<int> target_slots(const std::vector<std::string>& seq) {
  std::vector<int> slot(seq.size(), 0);
  int seen = 0;
  bool inside = false;
  for (size_t k = 0; k < seq.size(); ++k) {
    if (seq[k] == kStartToken) {
      inside = true;
      ++seen;
    } else if (seq[k] == kEndToken) {
      inside = false;
    } else if (inside) {
      slot[k] = seen;
    }
  }
  return slot;
}

}  // namespace

// [mean of all tokens; mean of the first marked span; mean of the second]
// through a tanh layer. The span averages let the scorer compare the mention
// and the pronoun directly instead of through the pooled context alone.
Var AffinityModel::encode(Tape& tape, std::span<const std::vector<std::string>> sequences) const {
  auto& store = const_cast<ParameterStore&>(params_);
  std::vector<std::vector<int>> slots;
  slots.reserve(sequences.size());
  for (const auto& seq : sequences) slots.push_back(target_slots(seq));
  Var table = tape.param(store.get("affinity.embeddings"));
  Var all = spmm(averaging_operator(sequences, vocab_, [](size_t, size_t) { return true; }), table);
  Var first = spmm(averaging_operator(sequences, vocab_, [&](size_t i, size_t k) { return slots[i][k] == 1; }), table);
  Var second = spmm(averaging_operator(sequences, vocab_, [&](size_t i, size_t k) { return slots[i][k] == 2; }), table);
  Var hidden = add_row(matmul(concat_cols({all, first, second}), tape.param(store.get("affinity.encoder.weight"))),
                       tape.param(store.get("affinity.encoder.bias")));
  return corefdre::tanh(hidden);
}

Var AffinityModel::score_batch(Tape& tape, std::span<const std::vector<std::string>> mention_first,
                               std::span<const std::vector<std::string>> pronoun_first) const {
  auto& store = const_cast<ParameterStore&>(params_);
  Var a = encode(tape, mention_first);
  Var b = encode(tape, pronoun_first);
  Var symmetric = scale(add(a, b), 0.5);
  Var logit = add_row(matmul(symmetric, tape.param(store.get("affinity.head.weight"))),
                      tape.param(store.get("affinity.head.bias")));
  return sigmoid(logit);
}

double AffinityModel::score(const Document& mention_doc, MentionRef mention, const Document& pronoun_doc,
                            const PronounOccurrence& pronoun) const {
  std::vector<std::vector<std::string>> first{
      build_pair_input(mention_doc, mention, pronoun_doc, pronoun, config_.context_radius, PairOrder::kMentionFirst)};
  std::vector<std::vector<std::string>> second{
      build_pair_input(mention_doc, mention, pronoun_doc, pronoun, config_.context_radius, PairOrder::kPronounFirst)};
  Tape tape(false);
  return score_batch(tape, first, second).scalar();
}

void AffinityModel::annotate(const Document& doc, std::span<const PronounOccurrence> pronouns,
                             std::vector<MentionPronounPair>& pairs) const {
  if (pairs.empty()) return;
  std::vector<std::vector<std::string>> first;
  std::vector<std::vector<std::string>> second;
  for (const MentionPronounPair& p : pairs) {
    const PronounOccurrence& pron = pronouns[static_cast<size_t>(p.pronoun)];
    first.push_back(build_pair_input(doc, p.mention, doc, pron, config_.context_radius, PairOrder::kMentionFirst));
    second.push_back(build_pair_input(doc, p.mention, doc, pron, config_.context_radius, PairOrder::kPronounFirst));
  }
  Tape tape(false);
  const Matrix scores = score_batch(tape, first, second).value();
  for (size_t i = 0; i < pairs.size(); ++i) pairs[i].affinity = scores(static_cast<Eigen::Index>(i), 0);
}

Archive AffinityModel::to_archive() const {
  Archive a("affinity-model");
  a.put_text("config", config_.to_text());
  a.put_strings("vocabulary", vocab_.words());
  for (const Parameter& p : params_.all()) a.put_matrix(p.name(), p.value());
  return a;
}

AffinityModel AffinityModel::from_archive(const Archive& archive) {
  if (archive.kind() != "affinity-model")
    throw ArchiveError("expected an affinity-model archive, got '" + archive.kind() + "'");
  AffinityConfig config = AffinityConfig::from_text(archive.text("config"));
  Vocabulary vocab(archive.strings("vocabulary"));
  AffinityModel model(vocab, config, 0);
  for (Parameter& p : model.params_.all()) {
    const Matrix& m = archive.matrix(p.name());
    if (m.rows() != p.value().rows() || m.cols() != p.value().cols())
      throw ArchiveError("parameter '" + p.name() + "' has shape " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", config expects " + std::to_string(p.value().rows()) + "x" +
                         std::to_string(p.value().cols()));
    p.value() = m;
  }
  return model;
}

// ---- loss --------------------------------------------------------------------

double affinity_loss_term(double positive, double negative, AffinityLoss kind) {
  const double neg_sq = negative * negative;
  const double miss_sq = (1.0 - positive) * (1.0 - positive);
  if (kind == AffinityLoss::kSquaredContrastive) return neg_sq + miss_sq;
  return std::max(0.0, neg_sq - miss_sq);
}

Var affinity_loss(Var positive, Var negative, AffinityLoss kind) {
  Tape& tape = *positive.tape();
  Var neg_sq = square(negative);
  Var miss_sq = square(add(scale(positive, -1.0), tape.constant(Matrix::Ones(positive.rows(), 1))));
  if (kind == AffinityLoss::kSquaredContrastive) return sum(add(neg_sq, miss_sq));
  return sum(relu(sub(neg_sq, miss_sq)));
}

namespace {

void build_sample_inputs(const AffinityModel& model, const std::vector<Document>& corpus, const CorpusPairs& pairs,
                         std::span<const PairSample> samples, std::vector<std::vector<std::string>>& pos_a,
                         std::vector<std::vector<std::string>>& pos_b, std::vector<std::vector<std::string>>& neg_a,
                         std::vector<std::vector<std::string>>& neg_b) {
  const int radius = model.config().context_radius;
  for (const PairSample& s : samples) {
    const Document& doc = corpus.at(static_cast<size_t>(s.doc));
    const Document& ndoc = corpus.at(static_cast<size_t>(s.negative_doc));
    const PronounOccurrence& pron = pairs.pronouns.at(static_cast<size_t>(s.doc)).at(static_cast<size_t>(s.pronoun));
    pos_a.push_back(build_pair_input(doc, s.positive, doc, pron, radius, PairOrder::kMentionFirst));
    pos_b.push_back(build_pair_input(doc, s.positive, doc, pron, radius, PairOrder::kPronounFirst));
    neg_a.push_back(build_pair_input(ndoc, s.negative, doc, pron, radius, PairOrder::kMentionFirst));
    neg_b.push_back(build_pair_input(ndoc, s.negative, doc, pron, radius, PairOrder::kPronounFirst));
  }
}

}  // namespace

Var affinity_loss(Tape& tape, const AffinityModel& model, const std::vector<Document>& corpus,
                  const CorpusPairs& pairs, std::span<const PairSample> samples) {
  if (samples.empty()) throw std::invalid_argument("affinity_loss: no samples");
  std::vector<std::vector<std::string>> pa, pb, na, nb;
  build_sample_inputs(model, corpus, pairs, samples, pa, pb, na, nb);
  Var pos = model.score_batch(tape, pa, pb);
  Var neg = model.score_batch(tape, na, nb);
  return affinity_loss(pos, neg, model.config().loss);
}

double affinity_loss(const AffinityModel& model, const std::vector<Document>& corpus, const CorpusPairs& pairs,
                     std::span<const PairSample> samples) {
  Tape tape(false);
  return affinity_loss(tape, model, corpus, pairs, samples).scalar();
}

// ---- training ----------------------------------------------------------------

AffinityModel train_affinity_on(const std::vector<Document>& corpus, const CorpusPairs& pairs,
                                std::span<const PairSample> samples, const AffinityConfig& config,
                                std::uint64_t seed, AffinityTrainingLog* log) {
  AffinityModel model(AffinityModel::make_vocabulary(corpus), config, seed);
  if (samples.empty()) return model;

  std::vector<std::vector<std::string>> pa, pb, na, nb;
  build_sample_inputs(model, corpus, pairs, samples, pa, pb, na, nb);

  auto full_loss = [&](double* mean_pos, double* mean_neg) {
    Tape tape(false);
    Var pos = model.score_batch(tape, pa, pb);
    Var neg = model.score_batch(tape, na, nb);
    if (mean_pos) *mean_pos = pos.value().mean();
    if (mean_neg) *mean_neg = neg.value().mean();
    return affinity_loss(pos, neg, config.loss).scalar();
  };

  AffinityTrainingLog local;
  AffinityTrainingLog& out = log ? *log : local;
  out.epoch_loss.clear();
  out.epoch_loss.push_back(full_loss(nullptr, nullptr));

  AdamW optimizer(AdamWOptions{config.learning_rate, 0.9, 0.999, 1e-8, 0.0});
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  const size_t batch = static_cast<size_t>(std::max(1, config.batch_size));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t begin = 0; begin < order.size(); begin += batch) {
      const size_t end = std::min(order.size(), begin + batch);
      std::vector<std::vector<std::string>> ba, bb, bna, bnb;
      for (size_t k = begin; k < end; ++k) {
        ba.push_back(pa[order[k]]);
        bb.push_back(pb[order[k]]);
        bna.push_back(na[order[k]]);
        bnb.push_back(nb[order[k]]);
      }
      Tape tape;
      Var loss = affinity_loss(model.score_batch(tape, ba, bb), model.score_batch(tape, bna, bnb), config.loss);
      if (!std::isfinite(loss.scalar()))
        throw AffinityTrainingError("affinity loss became non-finite at epoch " + std::to_string(epoch + 1) +
                                    ", batch starting at sample " + std::to_string(begin));
      tape.backward(loss);
      optimizer.step(model.params(), 1.0 / static_cast<double>(end - begin));
    }
    const double epoch_loss = full_loss(nullptr, nullptr);
    if (!std::isfinite(epoch_loss) || !model.params().all_finite())
      throw AffinityTrainingError("affinity training diverged after epoch " + std::to_string(epoch + 1));
    out.epoch_loss.push_back(epoch_loss);
  }
  full_loss(&out.mean_positive, &out.mean_negative);
  return model;
}

AffinityModel train_affinity(const std::vector<Document>& corpus, const CorpusPairs& pairs,
                             const AffinityConfig& config, std::uint64_t seed, AffinityTrainingLog* log) {
  const int available = static_cast<int>(pairs.pair_count());
  const int wanted = std::min(config.positives, available);
  auto samples = sample_training_pairs(corpus, pairs, wanted, seed);
  return train_affinity_on(corpus, pairs, samples, config, seed, log);
}

}  // namespace corefdre
