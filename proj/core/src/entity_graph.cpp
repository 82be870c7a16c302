#include "corefdre/entity_graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace corefdre {

// ---- merge ------------------------------------------------------------------

Var merge_pronouns(Tape& tape, Var mention, std::span<const Var> pronouns, std::span<const double> affinities,
                   double theta) {
  if (pronouns.size() != affinities.size()) throw std::invalid_argument("merge_pronouns: one affinity per pronoun");
  Var total;
  int kept = 0;
  for (size_t n = 0; n < pronouns.size(); ++n) {
    if (affinities[n] < theta) continue;
    Var term = scale(pronouns[n], affinities[n]);
    total = total.valid() ? add(total, term) : term;
    ++kept;
  }
  if (kept == 0) return concat_cols({mention, tape.constant(Matrix::Zero(1, mention.cols()))});
  return concat_cols({mention, scale(total, 1.0 / kept)});
}

Matrix merge_pronouns(const Matrix& mention, std::span<const Matrix> pronouns, std::span<const double> affinities,
                      double theta) {
  Tape tape(false);
  std::vector<Var> vars;
  for (const Matrix& p : pronouns) vars.push_back(tape.constant(p));
  return merge_pronouns(tape, tape.constant(mention), vars, affinities, theta).value();
}

int participating_pronouns(std::span<const double> affinities, double theta) {
  return static_cast<int>(std::count_if(affinities.begin(), affinities.end(), [&](double a) { return a >= theta; }));
}

int participating_pronouns(const Mpag& graph, double theta) {
  std::vector<double> affinities;
  for (const PronounLink& l : graph.links()) affinities.push_back(l.affinity);
  return participating_pronouns(affinities, theta);
}

SparseMatrix merge_operator(const Mpag& graph, double theta) {
  const int m = graph.mention_node_count();
  std::vector<std::vector<const PronounLink*>> kept(static_cast<size_t>(m));
  for (const PronounLink& l : graph.links())
    if (l.affinity >= theta) kept[static_cast<size_t>(l.mention_node)].push_back(&l);
  std::vector<Eigen::Triplet<double>> entries;
  for (int i = 0; i < m; ++i) {
    const auto& links = kept[static_cast<size_t>(i)];
    for (const PronounLink* l : links)
      entries.emplace_back(i, l->pronoun_node, l->affinity / static_cast<double>(links.size()));
  }
  SparseMatrix op(m, graph.node_count());
  op.setFromTriplets(entries.begin(), entries.end());
  return op;
}

Var merge_mentions(const Mpag& graph, Var node_reps, const SparseMatrix& op) {
  Var mentions = slice_rows(node_reps, 0, graph.mention_node_count());
  return concat_cols({mentions, spmm(op, node_reps)});
}

// ---- entities -----------------------------------------------------------------

Var aggregate_entity(std::span<const Var> merged_mentions) {
  if (merged_mentions.empty()) throw std::invalid_argument("aggregate_entity: an entity needs a mention");
  return mean_rows(concat_rows(merged_mentions));
}

SparseMatrix entity_average_operator(const Document& doc, const Mpag& graph) {
  std::vector<Eigen::Triplet<double>> entries;
  for (const MpagNode& n : graph.nodes()) {
    if (n.kind != NodeKind::kMention) continue;
    const double size = static_cast<double>(doc.entities[static_cast<size_t>(n.mention.entity)].mentions.size());
    entries.emplace_back(n.mention.entity, n.id, 1.0 / size);
  }
  SparseMatrix op(static_cast<Eigen::Index>(doc.entities.size()), graph.mention_node_count());
  op.setFromTriplets(entries.begin(), entries.end());
  return op;
}

void EntityAdjacency::connect(int i, int j) {
  if (i == j) return;
  bits_[index(i, j)] = 1;
  bits_[index(j, i)] = 1;
}

std::vector<int> EntityAdjacency::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j)
    if (connected(i, j)) out.push_back(j);
  return out;
}

EntityAdjacency entity_connectivity(const Document& doc, const Mpag& graph, double theta) {
  std::map<int, std::set<int>> present;  // sentence -> entities
  for (const MpagNode& n : graph.nodes())
    if (n.kind == NodeKind::kMention) present[n.sentence].insert(n.mention.entity);
  for (const PronounLink& l : graph.links()) {
    if (l.affinity < theta) continue;
    present[graph.node(l.pronoun_node).sentence].insert(graph.node(l.mention_node).mention.entity);
  }
  EntityAdjacency adj(static_cast<int>(doc.entities.size()));
  for (const auto& [sentence, entities] : present)
    for (int a : entities)
      for (int b : entities) adj.connect(a, b);
  return adj;
}

EntityEdgeParams EntityEdgeParams::create(ParameterStore& store, int entity_dim, int edge_dim, Rng& rng) {
  EntityEdgeParams p;
  p.weight = &store.add("edge.weight", 2 * entity_dim, edge_dim, Init::kXavierUniform, rng);
  p.bias = &store.add("edge.bias", 1, edge_dim, Init::kZero, rng);
  return p;
}

EntityGraph build_entity_graph(Tape& tape, Var entities, const EntityAdjacency& adjacency,
                               const EntityEdgeParams& params) {
  EntityGraph g;
  g.adjacency = adjacency;
  g.edge_dim = params.edge_dim();
  const int n = adjacency.size();
  g.arc_rows.assign(static_cast<size_t>(n * n), -1);
  std::vector<int> from;
  std::vector<int> to;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (adjacency.connected(i, j)) {
        g.arc_rows[static_cast<size_t>(i * n + j)] = static_cast<int>(g.arcs.size());
        g.arcs.emplace_back(i, j);
        from.push_back(i);
        to.push_back(j);
      }
  if (g.arcs.empty()) return g;
  Var pairs = concat_cols({gather_rows(entities, from), gather_rows(entities, to)});
  g.edges = add_row(relu(matmul(pairs, tape.param(*params.weight))), tape.param(*params.bias));
  return g;
}

// ---- paths --------------------------------------------------------------------

namespace {

void extend_paths(const EntityAdjacency& adj, int at, int o, int remaining, std::vector<char>& used,
                  EntityPath& current, std::vector<EntityPath>& out) {
  if (remaining == 1) {
    if (adj.connected(at, o)) out.push_back(current);
    return;
  }
  for (int next = 0; next < adj.size(); ++next) {
    if (used[static_cast<size_t>(next)] || next == o || !adj.connected(at, next)) continue;
    used[static_cast<size_t>(next)] = 1;
    current.push_back(next);
    extend_paths(adj, next, o, remaining - 1, used, current, out);
    current.pop_back();
    used[static_cast<size_t>(next)] = 0;
  }
}

}  // namespace

std::vector<EntityPath> enumerate_paths(const EntityAdjacency& adjacency, int s, int o, int hops) {
  if (s == o) throw std::invalid_argument("enumerate_paths: subject and object must differ");
  if (hops < 1) throw std::invalid_argument("enumerate_paths: hops must be at least 1");
  std::vector<EntityPath> out;
  if (hops == 2) {
    for (int i = 0; i < adjacency.size(); ++i)
      if (i != s && i != o && adjacency.connected(s, i) && adjacency.connected(i, o)) out.push_back({i});
    return out;
  }
  std::vector<char> used(static_cast<size_t>(adjacency.size()), 0);
  used[static_cast<size_t>(s)] = 1;
  EntityPath current;
  extend_paths(adjacency, s, o, hops, used, current, out);
  return out;
}

std::vector<int> path_edge_rows(const EntityGraph& graph, int s, int o, const EntityPath& path, int hops,
                                int padding_row) {
  if (static_cast<int>(path.size()) != hops - 1) throw std::invalid_argument("path length does not match hops");
  std::vector<int> chain{s};
  chain.insert(chain.end(), path.begin(), path.end());
  chain.push_back(o);
  std::vector<int> rows;
  for (size_t k = 0; k + 1 < chain.size(); ++k) rows.push_back(graph.arc(chain[k], chain[k + 1]));
  for (size_t k = chain.size() - 1; k > 0; --k) rows.push_back(graph.arc(chain[k], chain[k - 1]));
  for (int r : rows)
    if (r < 0) throw std::invalid_argument("path uses an edge missing from the entity graph");
  while (static_cast<int>(rows.size()) < path_blocks(hops)) rows.push_back(padding_row);
  return rows;
}

namespace {

// Edge table with one extra zero row for padding blocks.
Var padded_edges(Tape& tape, const EntityGraph& graph) {
  Var zero = tape.constant(Matrix::Zero(1, graph.edge_dim));
  if (!graph.edges.valid()) return zero;
  return concat_rows(std::vector<Var>{graph.edges, zero});
}

// Stacks path vectors: `rows` holds path_blocks(hops) edge rows per path.
Var stack_paths(const Var& table, const std::vector<int>& rows, int blocks) {
  const size_t paths = rows.size() / static_cast<size_t>(blocks);
  std::vector<Var> parts;
  for (int b = 0; b < blocks; ++b) {
    std::vector<int> idx(paths);
    for (size_t p = 0; p < paths; ++p) idx[p] = rows[p * static_cast<size_t>(blocks) + static_cast<size_t>(b)];
    parts.push_back(gather_rows(table, idx));
  }
  return concat_cols(parts);
}

}  // namespace

Var path_representation(Tape& tape, const EntityGraph& graph, int s, int o, const EntityPath& path, int hops) {
  Var table = padded_edges(tape, graph);
  const int padding = static_cast<int>(table.rows()) - 1;
  return stack_paths(table, path_edge_rows(graph, s, o, path, hops, padding), path_blocks(hops));
}

PathAttentionParams PathAttentionParams::create(ParameterStore& store, int entity_dim, int path_width, Rng& rng) {
  PathAttentionParams p;
  p.weight = &store.add("attention.weight", 2 * entity_dim, path_width, Init::kXavierUniform, rng);
  return p;
}

FusedPaths fuse_paths(Tape& tape, Var e_s, Var e_o, Var paths, const PathAttentionParams& params) {
  FusedPaths out;
  if (!paths.valid() || paths.rows() == 0) {
    out.vector = tape.constant(Matrix::Zero(1, params.path_width()));
    return out;
  }
  Var query = matmul(concat_cols({e_s, e_o}), tape.param(*params.weight));  // 1 x P
  Var scores = relu(matmul(paths, transpose(query)));                       // k x 1
  std::vector<int> segment(static_cast<size_t>(paths.rows()), 0);
  out.alpha = segment_softmax(scores, segment);
  out.vector = matmul(transpose(out.alpha), paths);
  return out;
}

Var fuse_pair_paths(Tape& tape, Var entities, const EntityGraph& graph, std::span<const EntityPair> pairs, int hops,
                    const PathAttentionParams& params) {
  const int blocks = path_blocks(hops);
  const auto pair_count = static_cast<Eigen::Index>(pairs.size());
  if (blocks * graph.edge_dim != params.path_width())
    throw std::invalid_argument("fuse_pair_paths: path width does not match the attention parameters");
  Var table = padded_edges(tape, graph);
  const int padding = static_cast<int>(table.rows()) - 1;

  std::vector<int> rows;
  std::vector<int> segment;
  for (size_t k = 0; k < pairs.size(); ++k) {
    const auto [s, o] = pairs[k];
    for (const EntityPath& path : enumerate_paths(graph.adjacency, s, o, hops)) {
      auto r = path_edge_rows(graph, s, o, path, hops, padding);
      rows.insert(rows.end(), r.begin(), r.end());
      segment.push_back(static_cast<int>(k));
    }
  }
  if (segment.empty()) return tape.constant(Matrix::Zero(pair_count, params.path_width()));

  Var paths = stack_paths(table, rows, blocks);  // total paths x P
  std::vector<int> subjects;
  std::vector<int> objects;
  for (int k : segment) {
    subjects.push_back(pairs[static_cast<size_t>(k)].first);
    objects.push_back(pairs[static_cast<size_t>(k)].second);
  }
  Var query = matmul(concat_cols({gather_rows(entities, subjects), gather_rows(entities, objects)}),
                     tape.param(*params.weight));
  Var scores = relu(row_sum(mul(query, paths)));
  Var alpha = segment_softmax(scores, segment);

  SparseMatrix gather(pair_count, static_cast<Eigen::Index>(segment.size()));
  std::vector<Eigen::Triplet<double>> entries;
  for (size_t p = 0; p < segment.size(); ++p) entries.emplace_back(segment[p], static_cast<int>(p), 1.0);
  gather.setFromTriplets(entries.begin(), entries.end());
  return spmm(gather, scale_rows(paths, alpha));
}

}  // namespace corefdre
