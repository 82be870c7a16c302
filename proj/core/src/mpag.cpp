#include "corefdre/mpag.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>

namespace corefdre {

std::string to_string(NodeKind kind) { return kind == NodeKind::kMention ? "mention" : "pronoun"; }

std::string to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::kIntraEntity:
      return "intra_entity";
    case EdgeKind::kIntraSentence:
      return "intra_sentence";
    case EdgeKind::kMentionPronoun:
      return "mention_pronoun";
    case EdgeKind::kSelfLoop:
      return "self_loop";
  }
  return "unknown";
}

int Mpag::add_node(NodeKind kind, int sentence, MentionRef mention, int pronoun) {
  const int id = node_count();
  nodes_.push_back(MpagNode{id, kind, mention, pronoun, sentence});
  return id;
}

bool Mpag::has_edge(int a, int b, EdgeKind kind) const {
  for (const MpagEdge& e : arcs(kind))
    if (e.from == a && e.to == b) return true;
  return false;
}

void Mpag::add_edge(int a, int b, EdgeKind kind, double weight) {
  if (a < 0 || b < 0 || a >= node_count() || b >= node_count()) throw MpagError("edge endpoint out of range");
  if (has_edge(a, b, kind)) return;
  auto& list = arcs_[static_cast<size_t>(kind)];
  list.push_back(MpagEdge{a, b, kind, weight});
  if (a != b) list.push_back(MpagEdge{b, a, kind, weight});
}

void Mpag::add_self_loop(int node) { add_edge(node, node, EdgeKind::kSelfLoop, 1.0); }

void Mpag::remove_edge(int a, int b, EdgeKind kind) {
  auto& list = arcs_[static_cast<size_t>(kind)];
  std::erase_if(list, [&](const MpagEdge& e) { return (e.from == a && e.to == b) || (e.from == b && e.to == a); });
}

void Mpag::set_weight(int a, int b, EdgeKind kind, double weight) {
  for (MpagEdge& e : arcs_[static_cast<size_t>(kind)])
    if ((e.from == a && e.to == b) || (e.from == b && e.to == a)) e.weight = weight;
  for (PronounLink& l : links_)
    if (kind == EdgeKind::kMentionPronoun &&
        ((l.mention_node == a && l.pronoun_node == b) || (l.mention_node == b && l.pronoun_node == a)))
      l.affinity = weight;
}

int Mpag::mention_node_count() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(),
                                        [](const MpagNode& n) { return n.kind == NodeKind::kMention; }));
}

int Mpag::edge_count(EdgeKind kind) const {
  int n = 0;
  for (const MpagEdge& e : arcs(kind)) n += e.from <= e.to ? 1 : 0;
  return n;
}

std::optional<int> Mpag::mention_node(MentionRef ref) const {
  for (const MpagNode& n : nodes_)
    if (n.kind == NodeKind::kMention && n.mention == ref) return n.id;
  return std::nullopt;
}

std::optional<int> Mpag::pronoun_node(int pronoun) const {
  for (const MpagNode& n : nodes_)
    if (n.kind == NodeKind::kPronoun && n.pronoun == pronoun) return n.id;
  return std::nullopt;
}

std::string Mpag::to_json(const Document& doc, std::span<const PronounOccurrence> pronouns) const {
  nlohmann::ordered_json j;
  j["doc_id"] = doc.doc_id;
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const MpagNode& n : nodes_) {
    nlohmann::ordered_json nj;
    nj["id"] = n.id;
    nj["kind"] = to_string(n.kind);
    nj["sentence"] = n.sentence;
    if (n.kind == NodeKind::kMention) {
      nj["entity"] = n.mention.entity;
      nj["mention"] = n.mention.mention;
      nj["text"] = mention_at(doc, n.mention).surface;
    } else {
      nj["pronoun"] = n.pronoun;
      nj["position"] = pronouns[static_cast<size_t>(n.pronoun)].position;
      nj["text"] = pronouns[static_cast<size_t>(n.pronoun)].surface;
    }
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = std::move(nodes);
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (EdgeKind kind : kAllEdgeKinds) {
    for (const MpagEdge& e : arcs(kind)) {
      if (e.from > e.to) continue;
      nlohmann::ordered_json ej;
      ej["from"] = e.from;
      ej["to"] = e.to;
      ej["kind"] = to_string(kind);
      ej["weight"] = e.weight;
      edges.push_back(std::move(ej));
    }
  }
  j["edges"] = std::move(edges);
  return j.dump(2) + "\n";
}

Mpag build_mpag(const Document& doc, std::span<const PronounOccurrence> pronouns,
                std::span<const MentionPronounPair> pairs, const MpagOptions& options) {
  Mpag g;
  std::map<MentionRef, int> mention_ids;
  for (const MentionRef& ref : all_mentions(doc))
    mention_ids[ref] = g.add_node(NodeKind::kMention, mention_at(doc, ref).sentence_index, ref);

  for (size_t i = 0; i < pairs.size(); ++i) {
    const MentionPronounPair& p = pairs[i];
    if (mention_ids.count(p.mention) == 0 || p.pronoun < 0 || p.pronoun >= static_cast<int>(pronouns.size()))
      throw MpagError("pair " + std::to_string(i) + " (mention " + std::to_string(p.mention.entity) + "/" +
                      std::to_string(p.mention.mention) + ", pronoun " + std::to_string(p.pronoun) +
                      ") references a missing node in '" + doc.doc_id + "'");
    if (!p.affinity) throw MpagError("pair " + std::to_string(i) + " in '" + doc.doc_id + "' has no affinity");
  }

  std::map<int, int> pronoun_ids;
  if (!options.disable_pronoun_nodes) {
    std::set<int> used;
    for (const MentionPronounPair& p : pairs) used.insert(p.pronoun);
    for (int p : used) pronoun_ids[p] = g.add_node(NodeKind::kPronoun, pronouns[static_cast<size_t>(p)].sentence_index, {}, p);
  }

  // Intra-entity: every mention pair of one entity.
  for (size_t e = 0; e < doc.entities.size(); ++e) {
    const int n = static_cast<int>(doc.entities[e].mentions.size());
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        g.add_edge(mention_ids.at({static_cast<int>(e), a}), mention_ids.at({static_cast<int>(e), b}),
                   EdgeKind::kIntraEntity);
  }
  // Intra-sentence: every node pair sharing a sentence, pronouns included.
  for (int a = 0; a < g.node_count(); ++a)
    for (int b = a + 1; b < g.node_count(); ++b)
      if (g.node(a).sentence == g.node(b).sentence) g.add_edge(a, b, EdgeKind::kIntraSentence);

  if (!options.disable_pronoun_nodes) {
    for (const MentionPronounPair& p : pairs) {
      const double w = options.unweighted_pronoun_edges ? 1.0 : *p.affinity;
      const int m = mention_ids.at(p.mention);
      const int q = pronoun_ids.at(p.pronoun);
      g.add_edge(m, q, EdgeKind::kMentionPronoun, w);
      g.add_link(PronounLink{m, q, w});
    }
  }
  for (int n = 0; n < g.node_count(); ++n) g.add_self_loop(n);
  return g;
}

GraphOperators make_operators(const Mpag& graph, NeighborNorm norm) {
  GraphOperators ops;
  const int n = graph.node_count();
  ops.nodes = n;
  std::array<std::vector<int>, kEdgeKindCount> counts;
  std::vector<int> total(static_cast<size_t>(n), 0);
  for (int k = 0; k < kEdgeKindCount; ++k) {
    counts[static_cast<size_t>(k)].assign(static_cast<size_t>(n), 0);
    for (const MpagEdge& e : graph.arcs(kAllEdgeKinds[static_cast<size_t>(k)])) {
      if (e.weight == 0.0) continue;
      ++counts[static_cast<size_t>(k)][static_cast<size_t>(e.to)];
      ++total[static_cast<size_t>(e.to)];
    }
  }
  for (int k = 0; k < kEdgeKindCount; ++k) {
    const auto kk = static_cast<size_t>(k);
    std::vector<Eigen::Triplet<double>> entries;
    for (const MpagEdge& e : graph.arcs(kAllEdgeKinds[kk])) {
      if (e.weight == 0.0) continue;
      const int denom = norm == NeighborNorm::kPerKind ? counts[kk][static_cast<size_t>(e.to)]
                                                       : total[static_cast<size_t>(e.to)];
      entries.emplace_back(e.to, e.from, e.weight / static_cast<double>(denom));
    }
    ops.adjacency[kk].resize(n, n);
    ops.adjacency[kk].setFromTriplets(entries.begin(), entries.end());
    ops.has_neighbors[kk] = Matrix::Zero(n, 1);
    for (int i = 0; i < n; ++i)
      if (counts[kk][static_cast<size_t>(i)] > 0) ops.has_neighbors[kk](i, 0) = 1.0;
  }
  return ops;
}

Var hetero_gcn_layer(Tape& tape, const GraphOperators& ops, Var features, const GcnLayerParams& params) {
  Var total;
  for (int k = 0; k < kEdgeKindCount; ++k) {
    const auto kk = static_cast<size_t>(k);
    if (ops.adjacency[kk].nonZeros() == 0) continue;
    Var message = spmm(ops.adjacency[kk], matmul(features, tape.param(*params.weight[kk])));
    Var bias = matmul(tape.constant(ops.has_neighbors[kk]), tape.param(*params.bias[kk]));
    Var term = add(message, bias);
    total = total.valid() ? add(total, term) : term;
  }
  if (!total.valid()) {
    const auto d = params.weight[0]->value().cols();
    return tape.constant(Matrix::Zero(features.rows(), d));
  }
  return relu(total);
}

HeteroGcn::HeteroGcn(ParameterStore& store, int dim, int layers, Rng& rng) : dim_(dim) {
  for (int l = 0; l < layers; ++l) {
    GcnLayerParams p;
    for (int k = 0; k < kEdgeKindCount; ++k) {
      const std::string prefix = "gcn." + std::to_string(l) + "." + to_string(kAllEdgeKinds[static_cast<size_t>(k)]);
      p.weight[static_cast<size_t>(k)] = &store.add(prefix + ".weight", dim, dim, Init::kXavierUniform, rng);
      p.bias[static_cast<size_t>(k)] = &store.add(prefix + ".bias", 1, dim, Init::kZero, rng);
    }
    layers_.push_back(p);
  }
}

Var HeteroGcn::propagate(Tape& tape, const GraphOperators& ops, Var features, double dropout,
                         const std::function<double()>* uniform01) const {
  std::vector<Var> levels{features};
  Var current = features;
  for (int l = 0; l < layers(); ++l) {
    Var input = current;
    if (l > 0 && uniform01 != nullptr) input = corefdre::dropout(input, dropout, *uniform01);
    current = hetero_gcn_layer(tape, ops, input, layers_[static_cast<size_t>(l)]);
    levels.push_back(current);
  }
  return concat_cols(levels);
}

}  // namespace corefdre
