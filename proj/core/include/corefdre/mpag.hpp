// Mention-pronoun affinity graph (MPAG) and heterogeneous graph convolution.
//
// Nodes are every annotated mention followed by every pronoun that takes part
// in at least one mention-pronoun pair. Edge kinds:
//
//   INTRA_ENTITY     mention <-> mention of the same entity
//   INTRA_SENTENCE   any two nodes in the same sentence
//   MENTION_PRONOUN  provider pair, weighted by its affinity
//   SELF_LOOP        every node, so isolated nodes are still transformed
//
// Undirected edges are stored as two arcs. Each kind has its own convolution
// weights.
#pragma once

#include "corefdre/autograd.hpp"
#include "corefdre/config.hpp"
#include "corefdre/coref.hpp"
#include "corefdre/corpus.hpp"
#include "corefdre/parameters.hpp"

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace corefdre {

enum class NodeKind { kMention, kPronoun };
enum class EdgeKind : int { kIntraEntity = 0, kIntraSentence = 1, kMentionPronoun = 2, kSelfLoop = 3 };
inline constexpr int kEdgeKindCount = 4;
inline constexpr std::array<EdgeKind, kEdgeKindCount> kAllEdgeKinds = {
    EdgeKind::kIntraEntity, EdgeKind::kIntraSentence, EdgeKind::kMentionPronoun, EdgeKind::kSelfLoop};

std::string to_string(NodeKind kind);
std::string to_string(EdgeKind kind);

struct MpagNode {
  int id = 0;
  NodeKind kind = NodeKind::kMention;
  MentionRef mention;  // valid for mention nodes
  int pronoun = -1;    // pronoun index for pronoun nodes
  int sentence = 0;
};

struct MpagEdge {
  int from = 0;
  int to = 0;
  EdgeKind kind = EdgeKind::kSelfLoop;
  double weight = 1.0;

  bool operator==(const MpagEdge&) const = default;
};

// A mention-pronoun link as used by the merge step.
struct PronounLink {
  int mention_node = 0;
  int pronoun_node = 0;
  double affinity = 1.0;
};

class MpagError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Mpag {
 public:
  int add_node(NodeKind kind, int sentence, MentionRef mention = {}, int pronoun = -1);
  // Adds both arcs; a second edge of the same kind between the same nodes is
  // ignored.
  void add_edge(int a, int b, EdgeKind kind, double weight = 1.0);
  void add_self_loop(int node);
  void remove_edge(int a, int b, EdgeKind kind);
  void set_weight(int a, int b, EdgeKind kind, double weight);
  void add_link(PronounLink link) { links_.push_back(link); }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int mention_node_count() const;
  int pronoun_node_count() const { return node_count() - mention_node_count(); }
  const std::vector<MpagNode>& nodes() const { return nodes_; }
  const MpagNode& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }
  // Directed arcs of one kind.
  const std::vector<MpagEdge>& arcs(EdgeKind kind) const { return arcs_[static_cast<size_t>(kind)]; }
  // Undirected count (self loops count once).
  int edge_count(EdgeKind kind) const;
  bool has_edge(int a, int b, EdgeKind kind) const;
  const std::vector<PronounLink>& links() const { return links_; }

  std::optional<int> mention_node(MentionRef ref) const;
  std::optional<int> pronoun_node(int pronoun) const;

  // JSON debugging dump: nodes with kind/source, undirected edges with
  // kind/weight.
  std::string to_json(const Document& doc, std::span<const PronounOccurrence> pronouns) const;

 private:
  std::vector<MpagNode> nodes_;
  std::array<std::vector<MpagEdge>, kEdgeKindCount> arcs_;
  std::vector<PronounLink> links_;
};

struct MpagOptions {
  bool disable_pronoun_nodes = false;
  bool unweighted_pronoun_edges = false;
};

// Pairs must carry affinities; a pair referencing a missing mention or pronoun
// raises MpagError naming it.
Mpag build_mpag(const Document& doc, std::span<const PronounOccurrence> pronouns,
                std::span<const MentionPronounPair> pairs, const MpagOptions& options = {});

// Normalised propagation operators for one graph. Arcs with weight 0 are
// treated as absent, so zeroing a weight is the same as deleting the edge.
struct GraphOperators {
  int nodes = 0;
  std::array<SparseMatrix, kEdgeKindCount> adjacency;  // row i: weighted, normalised neighbours of i
  std::array<Matrix, kEdgeKindCount> has_neighbors;    // n x 1 indicator per kind
};

GraphOperators make_operators(const Mpag& graph, NeighborNorm norm = NeighborNorm::kPerKind);

struct GcnLayerParams {
  std::array<Parameter*, kEdgeKindCount> weight{};  // d x d
  std::array<Parameter*, kEdgeKindCount> bias{};    // 1 x d
};

// out_i = relu( sum_e [ sum_{j in N_e(i)} w_ij / |N_e(i)| * f_j W_e + b_e ] ),
// where kinds without neighbours of i contribute nothing.
Var hetero_gcn_layer(Tape& tape, const GraphOperators& ops, Var features, const GcnLayerParams& params);

class HeteroGcn {
 public:
  HeteroGcn(ParameterStore& store, int dim, int layers, Rng& rng);

  int dim() const { return dim_; }
  int layers() const { return static_cast<int>(layers_.size()); }
  int output_dim() const { return (layers() + 1) * dim_; }
  const GcnLayerParams& layer(int l) const { return layers_.at(static_cast<size_t>(l)); }

  // [n^0; n^1; ...; n^L] per node. Dropout hits the input of every layer
  // after the first, and only when `uniform01` is given (training).
  Var propagate(Tape& tape, const GraphOperators& ops, Var features, double dropout = 0.0,
                const std::function<double()>* uniform01 = nullptr) const;

 private:
  int dim_;
  std::vector<GcnLayerParams> layers_;
};

}  // namespace corefdre
