#include "corefdre/encoding.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace corefdre {

// ---- vocabulary ----------------------------------------------------------------

std::string to_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Vocabulary::Vocabulary() { add(kUnknownWord); }

Vocabulary::Vocabulary(std::vector<std::string> words) {
  if (words.empty() || words.front() != kUnknownWord)
    throw std::invalid_argument("vocabulary word list must start with " + std::string(kUnknownWord));
  for (const auto& w : words) {
    if (index_.count(w) != 0) throw std::invalid_argument("duplicate vocabulary entry '" + w + "'");
    index_[w] = static_cast<int>(words_.size());
    words_.push_back(w);
  }
}

Vocabulary Vocabulary::build(const std::vector<Document>& corpus, const std::vector<std::string>& reserved) {
  Vocabulary v;
  for (const auto& r : reserved) v.add(r);
  std::set<std::string> words;
  for (const Document& doc : corpus)
    for (const auto& sentence : doc.sentences)
      for (const Token& t : sentence) words.insert(to_lower(t.surface));
  for (const auto& w : words) v.add(w);
  return v;
}

int Vocabulary::add(const std::string& word) {
  const std::string w = word == kUnknownWord ? word : to_lower(word);
  auto it = index_.find(w);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(words_.size());
  index_[w] = id;
  words_.push_back(w);
  return id;
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(to_lower(word));
  return it == index_.end() ? kUnknown : it->second;
}

bool Vocabulary::contains(const std::string& word) const { return index_.count(to_lower(word)) != 0; }

// ---- token features ---------------------------------------------------------------

TypeInventory TypeInventory::build(const std::vector<Document>& corpus) {
  std::set<std::string> types;
  for (const Document& doc : corpus)
    for (const Entity& e : doc.entities)
      for (const Mention& m : e.mentions) types.insert(m.entity_type);
  return TypeInventory(std::vector<std::string>(types.begin(), types.end()));
}

int TypeInventory::row(const std::string& type) const {
  auto it = std::lower_bound(types_.begin(), types_.end(), type);
  if (it == types_.end() || *it != type) return kNone;
  return static_cast<int>(it - types_.begin()) + 1;
}

TokenIndex index_tokens(const Document& doc, const Vocabulary& vocab, const TypeInventory& types, int id_rows) {
  if (static_cast<int>(doc.entities.size()) + 1 > id_rows)
    throw EncodingError("document '" + doc.doc_id + "' has " + std::to_string(doc.entities.size()) +
                        " entities but the entity-id table has " + std::to_string(id_rows - 1));
  TokenIndex out;
  const int n = doc.token_count();
  out.word_rows.reserve(static_cast<size_t>(n));
  for (const auto& sentence : doc.sentences)
    for (const Token& t : sentence) out.word_rows.push_back(vocab.id(t.surface));
  out.type_rows.assign(static_cast<size_t>(n), TypeInventory::kNone);
  out.id_rows.assign(static_cast<size_t>(n), 0);
  std::vector<bool> assigned(static_cast<size_t>(n), false);
  for (size_t e = 0; e < doc.entities.size(); ++e) {
    for (const Mention& m : doc.entities[e].mentions) {
      const int base = doc.token_offset(m.sentence_index);
      for (int k = m.span_start; k < m.span_end; ++k) {
        const auto pos = static_cast<size_t>(base + k);
        if (assigned[pos]) continue;
        assigned[pos] = true;
        out.type_rows[pos] = types.row(m.entity_type);
        out.id_rows[pos] = static_cast<int>(e) + 1;
      }
    }
  }
  return out;
}

EmbeddingTables EmbeddingTables::create(ParameterStore& store, int vocab_size, int word_dim, int type_rows,
                                        int type_dim, int max_entities, int id_dim, Rng& rng) {
  EmbeddingTables t;
  t.words = &store.add("embed.words", vocab_size, word_dim, Init::kNormalSmall, rng);
  t.types = &store.add("embed.types", type_rows, type_dim, Init::kNormalSmall, rng);
  t.ids = &store.add("embed.ids", max_entities + 1, id_dim, Init::kNormalSmall, rng);
  return t;
}

int EmbeddingTables::width() const {
  return static_cast<int>(words->value().cols() + types->value().cols() + ids->value().cols());
}

Var embed_document(Tape& tape, const TokenIndex& index, const EmbeddingTables& tables) {
  for (int r : index.id_rows)
    if (r >= tables.ids->value().rows())
      throw EncodingError("entity id row " + std::to_string(r) + " exceeds the entity-id table");
  Var w = gather_rows(tape.param(*tables.words), index.word_rows);
  Var t = gather_rows(tape.param(*tables.types), index.type_rows);
  Var i = gather_rows(tape.param(*tables.ids), index.id_rows);
  return concat_cols({w, t, i});
}

int load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, Parameter& table) {
  std::ifstream in(path);
  if (!in) throw EncodingError("cannot open word vectors " + path.string());
  std::string line;
  int loaded = 0;
  int lineno = 0;
  const auto dim = table.value().cols();
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> values;
    double x;
    while (ls >> x) values.push_back(x);
    if (static_cast<Eigen::Index>(values.size()) != dim)
      throw EncodingError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                          " values, found " + std::to_string(values.size()));
    if (!vocab.contains(word)) continue;
    const int row = vocab.id(word);
    for (Eigen::Index k = 0; k < dim; ++k) table.value()(row, k) = values[static_cast<size_t>(k)];
    ++loaded;
  }
  return loaded;
}

// ---- encoders ------------------------------------------------------------------

BiRnnEncoder::BiRnnEncoder(ParameterStore& store, const std::string& prefix, int input_dim, int output_dim, Rng& rng)
    : half_(output_dim / 2) {
  if (output_dim % 2 != 0) throw EncodingError("BiRnnEncoder output width must be even");
  fw_input_ = &store.add(prefix + ".fw.input", input_dim, half_, Init::kXavierUniform, rng);
  fw_recurrent_ = &store.add(prefix + ".fw.recurrent", half_, half_, Init::kXavierUniform, rng);
  fw_bias_ = &store.add(prefix + ".fw.bias", 1, half_, Init::kZero, rng);
  bw_input_ = &store.add(prefix + ".bw.input", input_dim, half_, Init::kXavierUniform, rng);
  bw_recurrent_ = &store.add(prefix + ".bw.recurrent", half_, half_, Init::kXavierUniform, rng);
  bw_bias_ = &store.add(prefix + ".bw.bias", 1, half_, Init::kZero, rng);
}

Var BiRnnEncoder::run(Tape& tape, Var projected, Parameter& recurrent, bool reverse) const {
  const Eigen::Index n = projected.rows();
  Var w = tape.param(recurrent);
  std::vector<Var> states(static_cast<size_t>(n));
  Var prev;
  for (Eigen::Index step = 0; step < n; ++step) {
    const Eigen::Index t = reverse ? n - 1 - step : step;
    Var pre = slice_rows(projected, t, 1);
    if (prev.valid()) pre = add(pre, matmul(prev, w));
    prev = corefdre::tanh(pre);
    states[static_cast<size_t>(t)] = prev;
  }
  return concat_rows(states);
}

Var BiRnnEncoder::encode(Tape& tape, Var features) const {
  Var fw_in = add_row(matmul(features, tape.param(*fw_input_)), tape.param(*fw_bias_));
  Var bw_in = add_row(matmul(features, tape.param(*bw_input_)), tape.param(*bw_bias_));
  Var fw = run(tape, fw_in, *fw_recurrent_, false);
  Var bw = run(tape, bw_in, *bw_recurrent_, true);
  return concat_cols({fw, bw});
}

NodeTypeEmbeddings NodeTypeEmbeddings::create(ParameterStore& store, int dim, Rng& rng) {
  NodeTypeEmbeddings t;
  t.mention = &store.add("node_type.mention", 1, dim, Init::kNormalSmall, rng);
  t.pronoun = &store.add("node_type.pronoun", 1, dim, Init::kNormalSmall, rng);
  return t;
}

// ---- node vectors -----------------------------------------------------------------

Var mention_node_rep(const Document& doc, const Mention& mention, Var hidden, Var mention_type) {
  const int start = doc.token_offset(mention.sentence_index) + mention.span_start;
  Var avg = mean_rows(slice_rows(hidden, start, mention.length()));
  return concat_cols({avg, mention_type});
}

Var pronoun_node_rep(const Document& doc, const PronounOccurrence& pronoun, Var hidden, Var pronoun_type) {
  const int pos = doc.token_offset(pronoun.sentence_index) + pronoun.position;
  return concat_cols({slice_rows(hidden, pos, 1), pronoun_type});
}

Var mention_node_reps(const Document& doc, std::span<const MentionRef> mentions, Var hidden, Var mention_type) {
  SparseMatrix averaging(static_cast<Eigen::Index>(mentions.size()), hidden.rows());
  std::vector<Eigen::Triplet<double>> entries;
  for (size_t i = 0; i < mentions.size(); ++i) {
    const Mention& m = mention_at(doc, mentions[i]);
    const int start = doc.token_offset(m.sentence_index) + m.span_start;
    const double w = 1.0 / static_cast<double>(m.length());
    for (int k = 0; k < m.length(); ++k) entries.emplace_back(static_cast<int>(i), start + k, w);
  }
  averaging.setFromTriplets(entries.begin(), entries.end());
  Var avg = spmm(averaging, hidden);
  return concat_cols({avg, repeat_rows(mention_type, static_cast<Eigen::Index>(mentions.size()))});
}

Var pronoun_node_reps(const Document& doc, std::span<const PronounOccurrence> pronouns, std::span<const int> which,
                      Var hidden, Var pronoun_type) {
  std::vector<int> rows;
  rows.reserve(which.size());
  for (int p : which) {
    const PronounOccurrence& pr = pronouns[static_cast<size_t>(p)];
    rows.push_back(doc.token_offset(pr.sentence_index) + pr.position);
  }
  Var h = gather_rows(hidden, rows);
  return concat_cols({h, repeat_rows(pronoun_type, static_cast<Eigen::Index>(rows.size()))});
}

}  // namespace corefdre
