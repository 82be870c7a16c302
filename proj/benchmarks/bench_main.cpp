#include "corefdre/entity_graph.hpp"
#include "corefdre/mpag.hpp"
#include "corefdre/pipeline.hpp"
#include "corefdre/synthetic.hpp"

#include <benchmark/benchmark.h>

using namespace corefdre;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

// A chain of sentences with two mentions and one pronoun each.
Mpag chain_graph(int sentences) {
  Mpag g;
  for (int s = 0; s < sentences; ++s) {
    const int a = g.add_node(NodeKind::kMention, s, MentionRef{s % 5, 2 * s});
    const int b = g.add_node(NodeKind::kMention, s, MentionRef{(s + 1) % 5, 2 * s + 1});
    g.add_edge(a, b, EdgeKind::kIntraSentence);
  }
  for (int s = 0; s < sentences; ++s) {
    const int p = g.add_node(NodeKind::kPronoun, s, {}, s);
    g.add_edge(2 * s, p, EdgeKind::kIntraSentence);
    g.add_edge(2 * s + 1, p, EdgeKind::kIntraSentence);
    if (s > 0) g.add_edge(2 * (s - 1), p, EdgeKind::kMentionPronoun, 0.7);
  }
  for (int i = 0; i < 2 * sentences; ++i)
    for (int j = i + 1; j < 2 * sentences; ++j)
      if (g.node(i).mention.entity == g.node(j).mention.entity) g.add_edge(i, j, EdgeKind::kIntraEntity);
  for (int i = 0; i < g.node_count(); ++i) g.add_self_loop(i);
  return g;
}

void BM_GcnLayer(benchmark::State& state) {
  Rng rng(1);
  const Mpag g = chain_graph(static_cast<int>(state.range(0)));
  const GraphOperators ops = make_operators(g);
  ParameterStore store;
  const HeteroGcn gcn(store, 64, 2, rng);
  const Matrix x = random_matrix(rng, g.node_count(), 64);
  for (auto _ : state) {
    Tape t(false);
    benchmark::DoNotOptimize(gcn.propagate(t, ops, t.constant(x)).value().data());
  }
  state.SetItemsProcessed(state.iterations() * g.node_count());
}
BENCHMARK(BM_GcnLayer)->Arg(10)->Arg(40)->Arg(160);

void BM_EnumeratePaths(benchmark::State& state) {
  Rng rng(2);
  const int n = static_cast<int>(state.range(0));
  EntityAdjacency adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.3) adj.connect(i, j);
  for (auto _ : state)
    for (int s = 0; s < n; ++s)
      for (int o = 0; o < n; ++o)
        if (s != o) benchmark::DoNotOptimize(enumerate_paths(adj, s, o, 2).size());
  state.SetItemsProcessed(state.iterations() * n * (n - 1));
}
BENCHMARK(BM_EnumeratePaths)->Arg(8)->Arg(32);

void BM_DocumentForward(benchmark::State& state) {
  SyntheticOptions opt;
  opt.documents = 4;
  const auto docs = generate_synthetic(opt);
  PipelineConfig cfg;
  cfg.word_dim = 32;
  cfg.hidden_dim = 64;
  cfg.edge_dim = 32;
  cfg.affinity_epochs = 0;
  const AffinityModel aff = train_affinity_model(cfg, docs);
  const auto model = RelationModel::create(cfg, synthetic_schema(), docs, aff);
  const PreparedDocument doc = model->prepare(docs[0]);
  const bool backward = state.range(0) != 0;
  for (auto _ : state) {
    Tape t(backward);
    Var probs = model->forward(t, doc, doc.candidates);
    if (backward) {
      t.backward(relation_loss(probs, doc.gold));
      model->params().zero_grad();
    }
    benchmark::DoNotOptimize(probs.value().data());
  }
}
BENCHMARK(BM_DocumentForward)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
