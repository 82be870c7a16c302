// Oracles, fixtures and gradient checking shared by the unit tests and the
// acceptance runner.
#pragma once

#include "corefdre/autograd.hpp"
#include "corefdre/config.hpp"
#include "corefdre/corpus.hpp"
#include "corefdre/entity_graph.hpp"
#include "corefdre/mpag.hpp"
#include "corefdre/parameters.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace corefdre::testing {

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.uniform(-1.0, 1.0);
  return m;
}

// ---- dense graph convolution ------------------------------------------------

// Direct per-node evaluation of the layer from the edge lists, with no sparse
// operators: every node sums w_ij / |N_e(i)| * f_j W_e over each kind's
// neighbours (weight-0 arcs do not count), adds b_e for kinds it has
// neighbours of, and applies ReLU.
inline Matrix dense_gcn_layer(const Mpag& g, const Matrix& x, const std::array<Matrix, kEdgeKindCount>& w,
                              const std::array<Matrix, kEdgeKindCount>& b,
                              NeighborNorm norm = NeighborNorm::kPerKind) {
  const int n = g.node_count();
  const Eigen::Index d = w[0].cols();
  Matrix out = Matrix::Zero(n, d);
  for (int i = 0; i < n; ++i) {
    std::array<int, kEdgeKindCount> count{};
    for (int k = 0; k < kEdgeKindCount; ++k)
      for (const MpagEdge& e : g.arcs(kAllEdgeKinds[static_cast<size_t>(k)]))
        if (e.to == i && e.weight != 0.0) ++count[static_cast<size_t>(k)];
    int total = 0;
    for (int c : count) total += c;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
    for (int k = 0; k < kEdgeKindCount; ++k) {
      const auto kk = static_cast<size_t>(k);
      if (count[kk] == 0) continue;
      const double denom = norm == NeighborNorm::kPerKind ? count[kk] : total;
      for (const MpagEdge& e : g.arcs(kAllEdgeKinds[kk])) {
        if (e.to != i || e.weight == 0.0) continue;
        for (Eigen::Index c = 0; c < d; ++c) {
          double dot = 0.0;
          for (Eigen::Index r = 0; r < x.cols(); ++r) dot += x(e.from, r) * w[kk](r, c);
          acc(c) += e.weight / denom * dot;
        }
      }
      acc += b[kk].row(0);
    }
    for (Eigen::Index c = 0; c < d; ++c) out(i, c) = std::max(0.0, acc(c));
  }
  return out;
}

// Random heterogeneous graph: mention nodes of a few entities, pronoun nodes,
// every edge kind present when possible, random weights on mention-pronoun
// edges (occasionally exactly 0).
inline Mpag random_mpag(Rng& rng, int max_nodes) {
  Mpag g;
  const int n = 2 + static_cast<int>(rng.index(static_cast<size_t>(max_nodes - 1)));
  const int pronouns = 1 + static_cast<int>(rng.index(static_cast<size_t>(std::max(1, n / 2))));
  const int mentions = n - pronouns;
  for (int i = 0; i < mentions; ++i)
    g.add_node(NodeKind::kMention, static_cast<int>(rng.index(3)),
               MentionRef{static_cast<int>(rng.index(2)), i});
  for (int i = 0; i < pronouns; ++i) g.add_node(NodeKind::kPronoun, static_cast<int>(rng.index(3)), {}, i);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const MpagNode& na = g.node(a);
      const MpagNode& nb = g.node(b);
      if (na.kind == NodeKind::kMention && nb.kind == NodeKind::kMention && na.mention.entity == nb.mention.entity)
        g.add_edge(a, b, EdgeKind::kIntraEntity);
      if (na.sentence == nb.sentence || rng.uniform() < 0.3) g.add_edge(a, b, EdgeKind::kIntraSentence);
      if (na.kind != nb.kind && rng.uniform() < 0.6) {
        const double w = rng.uniform() < 0.1 ? 0.0 : rng.uniform();
        const int m = na.kind == NodeKind::kMention ? a : b;
        const int p = na.kind == NodeKind::kMention ? b : a;
        g.add_edge(m, p, EdgeKind::kMentionPronoun, w);
        g.add_link(PronounLink{m, p, w});
      }
    }
  for (int i = 0; i < n; ++i) g.add_self_loop(i);
  return g;
}

// ---- paths ------------------------------------------------------------------

inline EntityAdjacency random_adjacency(Rng& rng, int n, double density) {
  EntityAdjacency adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < density) adj.connect(i, j);
  return adj;
}

// Exhaustive search: every ordered sequence of hops-1 distinct intermediates
// (none equal to s or o) is tested arc by arc.
inline std::vector<EntityPath> brute_force_paths(const EntityAdjacency& adj, int s, int o, int hops) {
  std::vector<EntityPath> out;
  const int n = adj.size();
  const int len = hops - 1;
  std::vector<int> seq(static_cast<size_t>(len), 0);
  std::function<void(int)> fill = [&](int k) {
    if (k == len) {
      std::vector<int> chain{s};
      chain.insert(chain.end(), seq.begin(), seq.end());
      chain.push_back(o);
      std::vector<int> sorted(chain);
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return;
      for (size_t i = 0; i + 1 < chain.size(); ++i)
        if (!adj.connected(chain[i], chain[i + 1])) return;
      out.push_back(seq);
      return;
    }
    for (int v = 0; v < n; ++v) {
      seq[static_cast<size_t>(k)] = v;
      fill(k + 1);
    }
  };
  fill(0);
  std::sort(out.begin(), out.end());
  return out;
}

inline EntityAdjacency complete_adjacency(int n) {
  EntityAdjacency a(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) a.connect(i, j);
  return a;
}

// Entity graph whose edge vectors are the standard basis, one per arc, so a
// path vector shows exactly which arcs went into each block.
inline EntityGraph unit_basis_graph(Tape& tape, const EntityAdjacency& adj) {
  EntityGraph g;
  g.adjacency = adj;
  const int n = adj.size();
  g.arc_rows.assign(static_cast<size_t>(n * n), -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (adj.connected(i, j)) {
        g.arc_rows[static_cast<size_t>(i * n + j)] = static_cast<int>(g.arcs.size());
        g.arcs.emplace_back(i, j);
      }
  g.edge_dim = static_cast<int>(g.arcs.size());
  g.edges = tape.constant(Matrix::Identity(g.edge_dim, g.edge_dim));
  return g;
}

// ---- gradient checking ------------------------------------------------------

struct GradCheck {
  double max_relative_error = 0.0;
  std::string worst;
  int checked = 0;
};

// Relative error |a - n| / max(|a|, |n|); entries where both are below
// `floor` are compared absolutely against `floor * 1e-2` instead.
inline GradCheck check_gradients(std::vector<Parameter*> params, const std::function<Var(Tape&)>& scalar,
                                 double step = 1e-5, double floor = 1e-7) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = scalar(tape);
    tape.backward(out);
  }
  GradCheck result;
  for (Parameter* p : params) {
    const Matrix analytic = p->grad();
    for (Eigen::Index i = 0; i < p->value().rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value().cols(); ++j) {
        const double saved = p->value()(i, j);
        p->value()(i, j) = saved + step;
        double plus;
        {
          Tape t(false);
          plus = scalar(t).scalar();
        }
        p->value()(i, j) = saved - step;
        double minus;
        {
          Tape t(false);
          minus = scalar(t).scalar();
        }
        p->value()(i, j) = saved;
        const double numeric = (plus - minus) / (2.0 * step);
        const double a = analytic(i, j);
        const double scale = std::max(std::abs(a), std::abs(numeric));
        double err = 0.0;
        if (scale >= floor) err = std::abs(a - numeric) / scale;
        else if (std::abs(a - numeric) > floor * 1e-2) err = 1.0;
        ++result.checked;
        if (err > result.max_relative_error) {
          result.max_relative_error = err;
          std::ostringstream w;
          w << p->name() << "(" << i << "," << j << ") analytic " << a << " numeric " << numeric;
          result.worst = w.str();
        }
      }
    }
    p->zero_grad();
  }
  return result;
}

// ---- fixtures ---------------------------------------------------------------

inline std::vector<Token> tokens_of(const std::string& text, int sentence) {
  std::vector<Token> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(Token{w, sentence, static_cast<int>(out.size())});
  return out;
}

inline Mention mention(int entity, int sentence, int start, int end, const std::string& surface,
                       const std::string& type) {
  return Mention{entity, sentence, start, end, surface, type};
}

inline RelationSchema biography_schema() {
  return RelationSchema({"place_of_birth", "place_of_death", "employer", "country"});
}

// A writer introduced by name, then referred to by "She" in the next sentence
// together with her birthplace.
inline Document biography_fixture() {
  Document d;
  d.doc_id = "biography";
  d.sentences.push_back(tokens_of("Colette de Jouvenel was a French writer .", 0));
  d.sentences.push_back(tokens_of("She was born in Castel-Novel .", 1));
  d.entities.push_back(Entity{0, "PER", {mention(0, 0, 0, 3, "Colette de Jouvenel", "PER")}});
  d.entities.push_back(Entity{1, "LOC", {mention(1, 1, 4, 5, "Castel-Novel", "LOC")}});
  d.facts.push_back(RelationFact{0, 1, 0, {0, 1}});
  return d;
}

// The biography plus an employer fact, so that one gold fact also occurs in
// the biography itself and the other does not.
inline Document two_fact_fixture() {
  Document d = biography_fixture();
  d.doc_id = "biography-test";
  d.sentences.push_back(tokens_of("She worked for Gallimard .", 2));
  d.entities.push_back(Entity{2, "ORG", {mention(2, 2, 3, 4, "Gallimard", "ORG")}});
  d.facts.push_back(RelationFact{0, 2, 2, {2}});
  return d;
}

}  // namespace corefdre::testing
