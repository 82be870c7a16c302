// Document model, DocRED-style JSON ingestion, validation and the shared-fact
// index used for Ign F1.
#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace corefdre {

struct Token {
  std::string surface;
  int sentence_index = 0;
  int position_in_sentence = 0;

  bool operator==(const Token&) const = default;
};

struct Mention {
  int entity_index = 0;
  int sentence_index = 0;
  int span_start = 0;  // inclusive token offset within the sentence
  int span_end = 0;    // exclusive
  std::string surface;
  std::string entity_type;

  int length() const { return span_end - span_start; }
  bool operator==(const Mention&) const = default;
};

struct Entity {
  int entity_id = 0;
  std::string entity_type;
  std::vector<Mention> mentions;

  bool operator==(const Entity&) const = default;
};

struct RelationFact {
  int head_entity = 0;
  int tail_entity = 0;
  int relation_id = 0;
  std::vector<int> evidence_sentences;  // sorted, unique

  bool operator==(const RelationFact&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<std::vector<Token>> sentences;
  std::vector<Entity> entities;
  std::vector<RelationFact> facts;

  int token_count() const;
  // Offset of the first token of `sentence` in document order.
  int token_offset(int sentence) const;
  int mention_count() const;

  bool operator==(const Document&) const = default;
};

// Handle to one mention: entity index plus position in that entity's list.
struct MentionRef {
  int entity = 0;
  int mention = 0;

  auto operator<=>(const MentionRef&) const = default;
};

inline const Mention& mention_at(const Document& doc, MentionRef ref) {
  return doc.entities.at(static_cast<size_t>(ref.entity)).mentions.at(static_cast<size_t>(ref.mention));
}

// All mentions in (entity, mention) order.
std::vector<MentionRef> all_mentions(const Document& doc);

// Ordered relation labels. "No relation" is not a label; an entity pair with
// no facts simply has an all-zero gold vector.
class RelationSchema {
 public:
  RelationSchema() = default;
  explicit RelationSchema(std::vector<std::string> labels);

  static RelationSchema load(const std::filesystem::path& path);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int id) const { return labels_.at(static_cast<size_t>(id)); }
  std::optional<int> index_of(const std::string& label) const;

  bool operator==(const RelationSchema& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

// Parse and validation failures. `document_index` is -1 when the failure is
// not tied to one document.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(int document_index, std::string field_path, const std::string& message);

  int document_index() const { return document_index_; }
  const std::string& field_path() const { return field_path_; }

 private:
  int document_index_;
  std::string field_path_;
};

// Violations are returned as data; each entry names the offending field.
std::vector<std::string> validate_document(const Document& doc, const RelationSchema& schema);
std::vector<std::string> validate_document(const Document& doc);

// Mentions sharing one span across different entities. The format allows it;
// callers may log these.
std::vector<std::string> overlap_warnings(const Document& doc);

std::vector<Document> parse_corpus(const std::string& json_text, const RelationSchema& schema);
std::vector<Document> load_corpus(const std::filesystem::path& path, const RelationSchema& schema);

// Canonical JSON (relation ids written as schema labels). Serialising a
// loaded corpus and reloading it gives equal documents; serialising twice
// gives identical bytes.
std::string serialize_corpus(const std::vector<Document>& docs, const RelationSchema& schema);
void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs, const RelationSchema& schema);
std::string serialize_schema(const RelationSchema& schema);

// Lowercased, whitespace-collapsed surface of an entity's first mention.
std::string normalized_entity_key(const Document& doc, int entity);

struct FactKey {
  std::string head;
  int relation_id = 0;
  std::string tail;

  auto operator<=>(const FactKey&) const = default;
};

FactKey fact_key(const Document& doc, int head, int tail, int relation_id);

class SharedFactIndex {
 public:
  void insert(FactKey key) { keys_.insert(std::move(key)); }
  bool contains(const FactKey& key) const { return keys_.count(key) != 0; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

 private:
  std::set<FactKey> keys_;
};

SharedFactIndex build_shared_fact_index(const std::vector<Document>& train);

}  // namespace corefdre
