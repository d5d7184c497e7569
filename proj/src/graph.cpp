#include "g2t/graph.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <set>
#include <sstream>

#include "g2t/vocab.hpp"

namespace g2t {

void validate(const MultiRelGraph& g) {
  if (g.nodes.empty()) throw GraphError("MultiRelGraph: no nodes");
  const int n = (int)g.nodes.size();
  for (const auto& t : g.triples)
    if (t.head < 0 || t.head >= n || t.tail < 0 || t.tail >= n)
      throw GraphError("MultiRelGraph: triple index out of range");
}

LeviGraph levi_transform(const MultiRelGraph& g) {
  validate(g);
  LeviGraph out;
  out.labels = g.nodes;
  out.kinds.assign(g.nodes.size(), LeviKind::Entity);
  for (const auto& t : g.triples) {
    const int rk = (int)out.labels.size();
    out.labels.push_back(t.relation);
    out.kinds.push_back(LeviKind::Relation);
    out.edges.push_back({t.head, rk, Rel::Default});
    out.edges.push_back({rk, t.tail, Rel::Default});
    out.edges.push_back({rk, t.head, Rel::Reverse});
    out.edges.push_back({t.tail, rk, Rel::Reverse});
  }
  return out;
}

TokenGraph tokenize_graph(const LeviGraph& g, const Vocab& vocab) {
  TokenGraph out;
  std::vector<std::pair<int, int>> span(g.labels.size());  // [begin,end)
  for (std::size_t v = 0; v < g.labels.size(); ++v) {
    auto toks = split_tokens(g.labels[v], vocab.lowercase);
    if (toks.empty())
      throw GraphError("EmptyNodeLabel: levi node " + std::to_string(v));
    span[v].first = (int)out.tokens.size();
    for (const auto& tok : toks) {
      out.tokens.push_back(vocab.id(tok));
      out.token_owner.push_back((int)v);
    }
    span[v].second = (int)out.tokens.size();
    // Consecutive tokens of one label are chained both ways.
    for (int i = span[v].first; i + 1 < span[v].second; ++i) {
      out.edges.push_back({i, i + 1, Rel::Default});
      out.edges.push_back({i + 1, i, Rel::Reverse});
    }
  }
  // Each Levi edge becomes the complete bipartite set between the two spans.
  for (const auto& e : g.edges)
    for (int a = span[e.src].first; a < span[e.src].second; ++a)
      for (int b = span[e.dst].first; b < span[e.dst].second; ++b)
        out.edges.push_back({a, b, e.rel});
  for (int i = 0; i < (int)out.tokens.size(); ++i)
    out.edges.push_back({i, i, Rel::SelfLoop});
  return out;
}

JointGraph build_joint_graph(const TokenGraph& g) {
  JointGraph out;
  out.base = g;
  out.context_index = (int)g.tokens.size();
  for (int i = 0; i < (int)g.tokens.size(); ++i) {
    out.extra_edges.push_back({i, out.context_index, Rel::Default});
    out.extra_edges.push_back({out.context_index, i, Rel::Reverse});
  }
  out.extra_edges.push_back({out.context_index, out.context_index,
                             Rel::SelfLoop});
  return out;
}

TokenGraph strip_context_node(const JointGraph& g) { return g.base; }

GraphStats graph_stats(const MultiRelGraph& g) {
  validate(g);
  GraphStats s;
  const int n = (int)g.nodes.size();
  s.size = n;
  std::vector<std::vector<int>> adj(n);
  for (const auto& t : g.triples) {
    adj[t.head].push_back(t.tail);
    adj[t.tail].push_back(t.head);
  }
  for (int start = 0; start < n; ++start) {
    std::vector<int> dist(n, -1);
    std::queue<int> q;
    dist[start] = 0;
    q.push(start);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
    }
    for (int v = 0; v < n; ++v)
      if (dist[v] > s.diameter) s.diameter = dist[v];
  }
  std::vector<std::set<int>> parents(n);
  for (const auto& t : g.triples) parents[t.tail].insert(t.head);
  for (int v = 0; v < n; ++v)
    if (parents[v].size() >= 2) s.reentrancies++;
  return s;
}

std::string debug_dump(const TokenGraph& g) {
  const int n = (int)g.tokens.size();
  std::vector<std::array<std::vector<int>, kNumRelations>> adj(n);
  for (const auto& e : g.edges) adj[e.src][(int)e.rel].push_back(e.dst);
  std::ostringstream os;
  static const char* kRelName[] = {"default", "reverse", "self"};
  for (int i = 0; i < n; ++i) {
    os << "node " << i << " tok=" << g.tokens[i]
       << " owner=" << g.token_owner[i];
    for (int r = 0; r < kNumRelations; ++r) {
      auto& lst = adj[i][r];
      std::sort(lst.begin(), lst.end());
      os << " " << kRelName[r] << "->[";
      for (std::size_t j = 0; j < lst.size(); ++j)
        os << (j ? "," : "") << lst[j];
      os << "]";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace g2t
