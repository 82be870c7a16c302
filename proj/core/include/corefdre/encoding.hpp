// Token input features, contextual encoders, and initial node vectors for
// mentions and pronouns.
#pragma once

#include "corefdre/autograd.hpp"
#include "corefdre/coref.hpp"
#include "corefdre/corpus.hpp"
#include "corefdre/parameters.hpp"
#include "corefdre/vocabulary.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace corefdre {

// Entity-type rows: 0 is the reserved "no entity" row, then one row per type.
class TypeInventory {
 public:
  static constexpr int kNone = 0;

  TypeInventory() = default;
  explicit TypeInventory(std::vector<std::string> types) : types_(std::move(types)) {}
  static TypeInventory build(const std::vector<Document>& corpus);

  // Row for a type; unknown types map to kNone.
  int row(const std::string& type) const;
  int rows() const { return static_cast<int>(types_.size()) + 1; }
  const std::vector<std::string>& types() const { return types_; }

 private:
  std::vector<std::string> types_;  // sorted
};

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row indices for the three embedding tables, one entry per token in document
// order.
struct TokenIndex {
  std::vector<int> word_rows;
  std::vector<int> type_rows;
  std::vector<int> id_rows;
};

// A token covered by a mention of entity k takes that entity's type row and id
// row k + 1; uncovered tokens take the none rows. When mentions of several
// entities overlap, the lowest entity index wins.
TokenIndex index_tokens(const Document& doc, const Vocabulary& vocab, const TypeInventory& types, int id_rows);

struct EmbeddingTables {
  Parameter* words = nullptr;  // vocab x word_dim
  Parameter* types = nullptr;  // type rows x type_dim
  Parameter* ids = nullptr;    // (max_entities + 1) x id_dim

  static EmbeddingTables create(ParameterStore& store, int vocab_size, int word_dim, int type_rows, int type_dim,
                                int max_entities, int id_dim, Rng& rng);
  int width() const;
};

// [word; type; id] per token: T x (word_dim + type_dim + id_dim).
Var embed_document(Tape& tape, const TokenIndex& index, const EmbeddingTables& tables);

// Loads "word v1 ... vd" lines into the rows of known words; returns the
// number of rows replaced. Lines of the wrong width are an error.
int load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, Parameter& table);

class ContextualEncoder {
 public:
  virtual ~ContextualEncoder() = default;
  // features: T x input_dim -> T x output_dim().
  virtual Var encode(Tape& tape, Var features) const = 0;
  virtual int output_dim() const = 0;
};

class IdentityEncoder final : public ContextualEncoder {
 public:
  explicit IdentityEncoder(int dim) : dim_(dim) {}
  Var encode(Tape&, Var features) const override { return features; }
  int output_dim() const override { return dim_; }

 private:
  int dim_;
};

// Single-layer bidirectional tanh RNN over the whole document; each direction
// contributes half of output_dim.
class BiRnnEncoder final : public ContextualEncoder {
 public:
  BiRnnEncoder(ParameterStore& store, const std::string& prefix, int input_dim, int output_dim, Rng& rng);
  Var encode(Tape& tape, Var features) const override;
  int output_dim() const override { return 2 * half_; }

 private:
  Var run(Tape& tape, Var projected, Parameter& recurrent, bool reverse) const;

  int half_;
  Parameter* fw_input_;
  Parameter* fw_recurrent_;
  Parameter* fw_bias_;
  Parameter* bw_input_;
  Parameter* bw_recurrent_;
  Parameter* bw_bias_;
};

// Type vectors appended to mention and pronoun node contents. Both share one
// width so the two node kinds live in one feature space.
struct NodeTypeEmbeddings {
  Parameter* mention = nullptr;  // 1 x dim
  Parameter* pronoun = nullptr;  // 1 x dim

  static NodeTypeEmbeddings create(ParameterStore& store, int dim, Rng& rng);
};

// [avg of hidden states over the span; t_m].
Var mention_node_rep(const Document& doc, const Mention& mention, Var hidden, Var mention_type);
// [hidden state at the pronoun; t_p].
Var pronoun_node_rep(const Document& doc, const PronounOccurrence& pronoun, Var hidden, Var pronoun_type);

// Batched forms: one row per mention (in `mentions` order) / pronoun.
Var mention_node_reps(const Document& doc, std::span<const MentionRef> mentions, Var hidden, Var mention_type);
Var pronoun_node_reps(const Document& doc, std::span<const PronounOccurrence> pronouns, std::span<const int> which,
                      Var hidden, Var pronoun_type);

}  // namespace corefdre
