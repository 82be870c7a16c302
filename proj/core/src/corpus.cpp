#include "corefdre/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace corefdre {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

int Document::token_count() const {
  int n = 0;
  for (const auto& s : sentences) n += static_cast<int>(s.size());
  return n;
}

int Document::token_offset(int sentence) const {
  int n = 0;
  for (int i = 0; i < sentence; ++i) n += static_cast<int>(sentences.at(static_cast<size_t>(i)).size());
  return n;
}

int Document::mention_count() const {
  int n = 0;
  for (const Entity& e : entities) n += static_cast<int>(e.mentions.size());
  return n;
}

std::vector<MentionRef> all_mentions(const Document& doc) {
  std::vector<MentionRef> out;
  for (size_t e = 0; e < doc.entities.size(); ++e)
    for (size_t m = 0; m < doc.entities[e].mentions.size(); ++m)
      out.push_back(MentionRef{static_cast<int>(e), static_cast<int>(m)});
  return out;
}

// ---- schema ----------------------------------------------------------------

RelationSchema::RelationSchema(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], static_cast<int>(i)).second)
      throw CorpusError(-1, "schema[" + std::to_string(i) + "]", "duplicate relation label '" + labels_[i] + "'");
  }
}

std::optional<int> RelationSchema::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

RelationSchema RelationSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError(-1, path.string(), "cannot open relation schema file");
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw CorpusError(-1, path.string(), std::string("schema is not valid JSON: ") + e.what());
  }
  if (!j.is_array()) throw CorpusError(-1, path.string(), "schema must be a JSON list of relation labels");
  std::vector<std::string> labels;
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw CorpusError(-1, "schema[" + std::to_string(i) + "]", "label must be a string");
    labels.push_back(j[i].get<std::string>());
  }
  return RelationSchema(std::move(labels));
}

std::string serialize_schema(const RelationSchema& schema) {
  return Json(schema.labels()).dump() + "\n";
}

CorpusError::CorpusError(int document_index, std::string field_path, const std::string& message)
    : std::runtime_error((document_index >= 0 ? "document " + std::to_string(document_index) + ", " : std::string()) +
                         field_path + ": " + message),
      document_index_(document_index),
      field_path_(std::move(field_path)) {}

// ---- validation -------------------------------------------------------------

namespace {

std::string strip_spaces(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

std::string mention_path(size_t e, size_t m) {
  return "vertexSet[" + std::to_string(e) + "][" + std::to_string(m) + "]";
}

}  // namespace

std::vector<std::string> validate_document(const Document& doc) {
  std::vector<std::string> out;
  const int n_sent = static_cast<int>(doc.sentences.size());
  for (size_t s = 0; s < doc.sentences.size(); ++s) {
    for (size_t k = 0; k < doc.sentences[s].size(); ++k) {
      const Token& t = doc.sentences[s][k];
      const std::string path = "sents[" + std::to_string(s) + "][" + std::to_string(k) + "]";
      if (t.surface.empty()) out.push_back(path + ": empty token surface");
      if (t.sentence_index != static_cast<int>(s) || t.position_in_sentence != static_cast<int>(k))
        out.push_back(path + ": token indices do not match its position");
    }
  }
  for (size_t e = 0; e < doc.entities.size(); ++e) {
    const Entity& ent = doc.entities[e];
    if (ent.entity_id != static_cast<int>(e))
      out.push_back("vertexSet[" + std::to_string(e) + "]: entity_id " + std::to_string(ent.entity_id) +
                    " is not its index");
    if (ent.mentions.empty()) out.push_back("vertexSet[" + std::to_string(e) + "]: entity has no mentions");
    for (size_t m = 0; m < ent.mentions.size(); ++m) {
      const Mention& mn = ent.mentions[m];
      const std::string path = mention_path(e, m);
      const std::string who = " (entity " + std::to_string(e) + ", mention " + std::to_string(m) + " '" +
                              mn.surface + "')";
      if (mn.entity_index != static_cast<int>(e))
        out.push_back(path + ": entity_index does not match its entity" + who);
      if (mn.sentence_index < 0 || mn.sentence_index >= n_sent) {
        out.push_back(path + ".sent_id: sentence " + std::to_string(mn.sentence_index) + " out of range" + who);
        continue;
      }
      const auto& sent = doc.sentences[static_cast<size_t>(mn.sentence_index)];
      if (mn.span_start < 0 || mn.span_start >= mn.span_end || mn.span_end > static_cast<int>(sent.size())) {
        out.push_back(path + ".pos: span [" + std::to_string(mn.span_start) + ", " + std::to_string(mn.span_end) +
                      ") out of bounds for sentence of length " + std::to_string(sent.size()) + who);
        continue;
      }
      // Surfaces are compared ignoring whitespace: detokenised names such as
      // "Bel-Gazou" must match the tokens "Bel - Gazou".
      std::string joined;
      for (int k = mn.span_start; k < mn.span_end; ++k) joined += sent[static_cast<size_t>(k)].surface;
      if (strip_spaces(joined) != strip_spaces(mn.surface))
        out.push_back(path + ".name: surface does not match span tokens '" + joined + "'" + who);
    }
  }
  const int n_ent = static_cast<int>(doc.entities.size());
  for (size_t f = 0; f < doc.facts.size(); ++f) {
    const RelationFact& fact = doc.facts[f];
    const std::string path = "labels[" + std::to_string(f) + "]";
    if (fact.head_entity < 0 || fact.head_entity >= n_ent) out.push_back(path + ".h: entity index out of range");
    if (fact.tail_entity < 0 || fact.tail_entity >= n_ent) out.push_back(path + ".t: entity index out of range");
    if (fact.head_entity == fact.tail_entity) out.push_back(path + ": head equals tail");
    for (int ev : fact.evidence_sentences)
      if (ev < 0 || ev >= n_sent) out.push_back(path + ".evidence: sentence " + std::to_string(ev) + " out of range");
  }
  return out;
}

std::vector<std::string> validate_document(const Document& doc, const RelationSchema& schema) {
  std::vector<std::string> out = validate_document(doc);
  for (size_t f = 0; f < doc.facts.size(); ++f) {
    const int r = doc.facts[f].relation_id;
    if (r < 0 || r >= schema.size())
      out.push_back("labels[" + std::to_string(f) + "].r: relation id " + std::to_string(r) + " outside schema");
  }
  return out;
}

std::vector<std::string> overlap_warnings(const Document& doc) {
  std::vector<std::string> out;
  const auto refs = all_mentions(doc);
  for (size_t a = 0; a < refs.size(); ++a) {
    for (size_t b = a + 1; b < refs.size(); ++b) {
      if (refs[a].entity == refs[b].entity) continue;
      const Mention& x = mention_at(doc, refs[a]);
      const Mention& y = mention_at(doc, refs[b]);
      if (x.sentence_index == y.sentence_index && x.span_start == y.span_start && x.span_end == y.span_end)
        out.push_back(mention_path(static_cast<size_t>(refs[a].entity), static_cast<size_t>(refs[a].mention)) +
                      " and " +
                      mention_path(static_cast<size_t>(refs[b].entity), static_cast<size_t>(refs[b].mention)) +
                      " share a span");
    }
  }
  return out;
}

// ---- JSON ingestion ---------------------------------------------------------

namespace {

const Json& require(const Json& obj, const char* key, int doc, const std::string& path) {
  if (!obj.is_object()) throw CorpusError(doc, path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw CorpusError(doc, path + "." + key, "missing field");
  return *it;
}

int require_int(const Json& v, int doc, const std::string& path) {
  if (!v.is_number_integer()) throw CorpusError(doc, path, "expected an integer");
  return v.get<int>();
}

Document parse_document(const Json& j, int doc_index, const RelationSchema& schema) {
  const std::string root = "[" + std::to_string(doc_index) + "]";
  Document doc;
  const Json& title = require(j, "title", doc_index, root);
  if (!title.is_string()) throw CorpusError(doc_index, root + ".title", "expected a string");
  doc.doc_id = title.get<std::string>();

  const Json& sents = require(j, "sents", doc_index, root);
  if (!sents.is_array()) throw CorpusError(doc_index, root + ".sents", "expected a list of sentences");
  for (size_t s = 0; s < sents.size(); ++s) {
    const std::string spath = root + ".sents[" + std::to_string(s) + "]";
    if (!sents[s].is_array()) throw CorpusError(doc_index, spath, "expected a list of tokens");
    std::vector<Token> sentence;
    for (size_t k = 0; k < sents[s].size(); ++k) {
      if (!sents[s][k].is_string())
        throw CorpusError(doc_index, spath + "[" + std::to_string(k) + "]", "expected a token string");
      sentence.push_back(Token{sents[s][k].get<std::string>(), static_cast<int>(s), static_cast<int>(k)});
    }
    doc.sentences.push_back(std::move(sentence));
  }

  const Json& vertex_set = require(j, "vertexSet", doc_index, root);
  if (!vertex_set.is_array()) throw CorpusError(doc_index, root + ".vertexSet", "expected a list of entities");
  for (size_t e = 0; e < vertex_set.size(); ++e) {
    const std::string epath = root + ".vertexSet[" + std::to_string(e) + "]";
    if (!vertex_set[e].is_array()) throw CorpusError(doc_index, epath, "expected a list of mentions");
    Entity entity;
    entity.entity_id = static_cast<int>(e);
    for (size_t m = 0; m < vertex_set[e].size(); ++m) {
      const Json& mj = vertex_set[e][m];
      const std::string mpath = epath + "[" + std::to_string(m) + "]";
      Mention mention;
      mention.entity_index = static_cast<int>(e);
      const Json& name = require(mj, "name", doc_index, mpath);
      if (!name.is_string()) throw CorpusError(doc_index, mpath + ".name", "expected a string");
      mention.surface = name.get<std::string>();
      mention.sentence_index = require_int(require(mj, "sent_id", doc_index, mpath), doc_index, mpath + ".sent_id");
      const Json& pos = require(mj, "pos", doc_index, mpath);
      if (!pos.is_array() || pos.size() != 2)
        throw CorpusError(doc_index, mpath + ".pos", "expected [start, end]");
      mention.span_start = require_int(pos[0], doc_index, mpath + ".pos[0]");
      mention.span_end = require_int(pos[1], doc_index, mpath + ".pos[1]");
      const Json& type = require(mj, "type", doc_index, mpath);
      if (!type.is_string()) throw CorpusError(doc_index, mpath + ".type", "expected a string");
      mention.entity_type = type.get<std::string>();
      entity.mentions.push_back(std::move(mention));
    }
    if (!entity.mentions.empty()) entity.entity_type = entity.mentions.front().entity_type;
    doc.entities.push_back(std::move(entity));
  }

  // Unlabelled (test-style) documents may omit "labels".
  if (j.contains("labels")) {
    const Json& labels = j.at("labels");
    if (!labels.is_array()) throw CorpusError(doc_index, root + ".labels", "expected a list of facts");
    for (size_t f = 0; f < labels.size(); ++f) {
      const std::string fpath = root + ".labels[" + std::to_string(f) + "]";
      const Json& lj = labels[f];
      RelationFact fact;
      fact.head_entity = require_int(require(lj, "h", doc_index, fpath), doc_index, fpath + ".h");
      fact.tail_entity = require_int(require(lj, "t", doc_index, fpath), doc_index, fpath + ".t");
      const Json& r = require(lj, "r", doc_index, fpath);
      if (r.is_string()) {
        auto id = schema.index_of(r.get<std::string>());
        if (!id) throw CorpusError(doc_index, fpath + ".r", "unknown relation label '" + r.get<std::string>() + "'");
        fact.relation_id = *id;
      } else if (r.is_number_integer()) {
        fact.relation_id = r.get<int>();
      } else {
        throw CorpusError(doc_index, fpath + ".r", "expected a relation label or index");
      }
      if (lj.contains("evidence")) {
        const Json& ev = lj.at("evidence");
        if (!ev.is_array()) throw CorpusError(doc_index, fpath + ".evidence", "expected a list of sentence ids");
        for (size_t k = 0; k < ev.size(); ++k)
          fact.evidence_sentences.push_back(
              require_int(ev[k], doc_index, fpath + ".evidence[" + std::to_string(k) + "]"));
        std::sort(fact.evidence_sentences.begin(), fact.evidence_sentences.end());
        fact.evidence_sentences.erase(std::unique(fact.evidence_sentences.begin(), fact.evidence_sentences.end()),
                                      fact.evidence_sentences.end());
      }
      doc.facts.push_back(std::move(fact));
    }
  }
  return doc;
}

}  // namespace

std::vector<Document> parse_corpus(const std::string& json_text, const RelationSchema& schema) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw CorpusError(-1, "$", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_array()) throw CorpusError(-1, "$", "corpus must be a JSON list of documents");
  std::vector<Document> docs;
  docs.reserve(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    Document doc = parse_document(j[i], static_cast<int>(i), schema);
    auto violations = validate_document(doc, schema);
    if (!violations.empty()) {
      // Violations read "<field path>: <problem>".
      const std::string& first = violations.front();
      const auto colon = first.find(": ");
      std::string field = "[" + std::to_string(i) + "]";
      std::string message = first;
      if (colon != std::string::npos) {
        field += "." + first.substr(0, colon);
        message = first.substr(colon + 2);
      }
      if (violations.size() > 1) message += " (+" + std::to_string(violations.size() - 1) + " more)";
      throw CorpusError(static_cast<int>(i), field, message);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, const RelationSchema& schema) {
  std::ifstream in(path);
  if (!in) throw CorpusError(-1, path.string(), "cannot open corpus file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str(), schema);
}

std::string serialize_corpus(const std::vector<Document>& docs, const RelationSchema& schema) {
  OrderedJson out = OrderedJson::array();
  for (const Document& doc : docs) {
    OrderedJson d;
    d["title"] = doc.doc_id;
    OrderedJson sents = OrderedJson::array();
    for (const auto& sentence : doc.sentences) {
      OrderedJson s = OrderedJson::array();
      for (const Token& t : sentence) s.push_back(t.surface);
      sents.push_back(std::move(s));
    }
    d["sents"] = std::move(sents);
    OrderedJson vertex_set = OrderedJson::array();
    for (const Entity& e : doc.entities) {
      OrderedJson ms = OrderedJson::array();
      for (const Mention& m : e.mentions) {
        OrderedJson mj;
        mj["name"] = m.surface;
        mj["sent_id"] = m.sentence_index;
        mj["pos"] = {m.span_start, m.span_end};
        mj["type"] = m.entity_type;
        ms.push_back(std::move(mj));
      }
      vertex_set.push_back(std::move(ms));
    }
    d["vertexSet"] = std::move(vertex_set);
    OrderedJson labels = OrderedJson::array();
    for (const RelationFact& f : doc.facts) {
      OrderedJson lj;
      lj["h"] = f.head_entity;
      lj["t"] = f.tail_entity;
      if (f.relation_id >= 0 && f.relation_id < schema.size()) {
        lj["r"] = schema.label(f.relation_id);
      } else {
        lj["r"] = f.relation_id;
      }
      lj["evidence"] = f.evidence_sentences;
      labels.push_back(std::move(lj));
    }
    d["labels"] = std::move(labels);
    out.push_back(std::move(d));
  }
  return out.dump() + "\n";
}

void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs, const RelationSchema& schema) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CorpusError(-1, path.string(), "cannot open for writing");
  out << serialize_corpus(docs, schema);
  if (!out) throw CorpusError(-1, path.string(), "write failed");
}

// ---- Ign F1 bookkeeping -----------------------------------------------------

std::string normalized_entity_key(const Document& doc, int entity) {
  const Entity& e = doc.entities.at(static_cast<size_t>(entity));
  const std::string& surface = e.mentions.empty() ? std::string() : e.mentions.front().surface;
  std::string out;
  bool pending_space = false;
  for (char c : surface) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

FactKey fact_key(const Document& doc, int head, int tail, int relation_id) {
  return FactKey{normalized_entity_key(doc, head), relation_id, normalized_entity_key(doc, tail)};
}

SharedFactIndex build_shared_fact_index(const std::vector<Document>& train) {
  SharedFactIndex index;
  for (const Document& doc : train)
    for (const RelationFact& f : doc.facts) index.insert(fact_key(doc, f.head_entity, f.tail_entity, f.relation_id));
  return index;
}

}  // namespace corefdre
