// Entity graph construction and path reasoning.
//
// Mention nodes absorb their linked pronouns (gated by theta and weighted by
// affinity), entities average their merged mentions, connected entity pairs
// get learned directed edge vectors, and each candidate pair attends over the
// paths between its two entities.
#pragma once

#include "corefdre/autograd.hpp"
#include "corefdre/corpus.hpp"
#include "corefdre/mpag.hpp"
#include "corefdre/parameters.hpp"

#include <span>
#include <utility>
#include <vector>

namespace corefdre {

using EntityPair = std::pair<int, int>;  // (subject, object)

// ---- merge ------------------------------------------------------------------

// [m; (1/N) sum_n aff_n p_n] over the N pronouns with aff_n >= theta. The
// pronoun block has the mention's width and is zero when N = 0.
Var merge_pronouns(Tape& tape, Var mention, std::span<const Var> pronouns, std::span<const double> affinities,
                   double theta);
Matrix merge_pronouns(const Matrix& mention, std::span<const Matrix> pronouns, std::span<const double> affinities,
                      double theta);

int participating_pronouns(std::span<const double> affinities, double theta);
// Links of the graph that pass the gate.
int participating_pronouns(const Mpag& graph, double theta);

// Sparse (mention nodes x all nodes) operator whose product with the node
// matrix is the pronoun block of every mention.
SparseMatrix merge_operator(const Mpag& graph, double theta);
// Merged vectors for all mention nodes, in node order.
Var merge_mentions(const Mpag& graph, Var node_reps, const SparseMatrix& op);

// ---- entities -----------------------------------------------------------------

Var aggregate_entity(std::span<const Var> merged_mentions);
// Sparse (entities x mention nodes) averaging operator.
SparseMatrix entity_average_operator(const Document& doc, const Mpag& graph);

// Symmetric connectivity between entities.
class EntityAdjacency {
 public:
  explicit EntityAdjacency(int entities = 0)
      : n_(entities), bits_(static_cast<size_t>(entities) * static_cast<size_t>(entities), 0) {}

  int size() const { return n_; }
  void connect(int i, int j);
  bool connected(int i, int j) const { return bits_[index(i, j)] != 0; }
  std::vector<int> neighbors(int i) const;
  bool operator==(const EntityAdjacency&) const = default;

 private:
  size_t index(int i, int j) const { return static_cast<size_t>(i) * static_cast<size_t>(n_) + static_cast<size_t>(j); }
  int n_;
  std::vector<char> bits_;
};

// Two entities are connected when a mention of one and a mention of the other
// share a sentence. A pronoun that passes the merge gate counts as a mention
// of each entity it is linked to.
EntityAdjacency entity_connectivity(const Document& doc, const Mpag& graph, double theta);

struct EntityEdgeParams {
  Parameter* weight = nullptr;  // 2 * entity_dim x edge_dim
  Parameter* bias = nullptr;    // 1 x edge_dim

  static EntityEdgeParams create(ParameterStore& store, int entity_dim, int edge_dim, Rng& rng);
  int edge_dim() const { return static_cast<int>(weight->value().cols()); }
};

struct EntityGraph {
  EntityAdjacency adjacency;
  std::vector<EntityPair> arcs;  // connected ordered pairs, row order of `edges`
  std::vector<int> arc_rows;     // n*n lookup, -1 when absent
  Var edges;                     // arcs x edge_dim; relu([e_i; e_j] W_q) + b_q
  int edge_dim = 0;

  // Row of edge (i, j) in `edges`, or -1.
  int arc(int i, int j) const { return arc_rows[static_cast<size_t>(i * adjacency.size() + j)]; }
};

EntityGraph build_entity_graph(Tape& tape, Var entities, const EntityAdjacency& adjacency,
                               const EntityEdgeParams& params);

// ---- paths --------------------------------------------------------------------

// Intermediate entities of one path.
using EntityPath = std::vector<int>;

// Simple paths with exactly `hops` arcs from s to o, in lexicographic order of
// their intermediate sequences.
std::vector<EntityPath> enumerate_paths(const EntityAdjacency& adjacency, int s, int o, int hops = 2);

// Blocks in a path vector: the forward arcs then the reverse arcs, padded with
// zero blocks to at least four.
inline int path_blocks(int hops) { return hops * 2 < 4 ? 4 : hops * 2; }

// Edge rows making up one path vector; `padding_row` marks a zero block.
std::vector<int> path_edge_rows(const EntityGraph& graph, int s, int o, const EntityPath& path, int hops,
                                int padding_row);

Var path_representation(Tape& tape, const EntityGraph& graph, int s, int o, const EntityPath& path, int hops);

struct PathAttentionParams {
  Parameter* weight = nullptr;  // 2 * entity_dim x path width

  static PathAttentionParams create(ParameterStore& store, int entity_dim, int path_width, Rng& rng);
  int path_width() const { return static_cast<int>(weight->value().cols()); }
};

struct FusedPaths {
  Var vector;  // 1 x path width; zero when there are no paths
  Var alpha;   // k x 1 attention weights; invalid when there are no paths
};

// s_i = relu([e_s; e_o] W_l p_i), alpha = softmax(s), p = sum_i alpha_i p_i.
// `paths` holds one path vector per row and may be invalid for k = 0.
FusedPaths fuse_paths(Tape& tape, Var e_s, Var e_o, Var paths, const PathAttentionParams& params);

// Fused path vectors for many pairs at once: one row per pair.
Var fuse_pair_paths(Tape& tape, Var entities, const EntityGraph& graph, std::span<const EntityPair> pairs, int hops,
                    const PathAttentionParams& params);

}  // namespace corefdre
