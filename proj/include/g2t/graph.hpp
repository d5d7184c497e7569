#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace g2t {

// Relation types on token/joint graphs. Self loops are added so a node's own
// state participates in single-layer neighborhood updates.
enum class Rel : std::uint8_t { Default = 0, Reverse = 1, SelfLoop = 2 };
inline constexpr int kNumRelations = 3;

struct Triple {
  int head;
  std::string relation;
  int tail;
  bool operator==(const Triple&) const = default;
};

// Labeled, directed, multi-relational input graph.
struct MultiRelGraph {
  std::vector<std::string> nodes;
  std::vector<Triple> triples;
  bool operator==(const MultiRelGraph&) const = default;
};

enum class LeviKind : std::uint8_t { Entity = 0, Relation = 1 };

struct LeviEdge {
  int src;
  int dst;
  Rel rel;
  bool operator==(const LeviEdge&) const = default;
};

// Unlabeled bipartite graph with one relation node per triple occurrence.
struct LeviGraph {
  std::vector<std::string> labels;
  std::vector<LeviKind> kinds;
  std::vector<LeviEdge> edges;
};

struct TokenEdge {
  int src;
  int dst;
  Rel rel;
  bool operator==(const TokenEdge&) const = default;
};

// Levi graph expanded to one node per label token.
struct TokenGraph {
  std::vector<int> tokens;       // token ids
  std::vector<int> token_owner;  // token position -> originating Levi node
  std::vector<TokenEdge> edges;
};

// Token graph plus a generated-context node wired to every token node.
struct JointGraph {
  TokenGraph base;
  int context_index = -1;
  std::vector<TokenEdge> extra_edges;
  int num_nodes() const { return (int)base.tokens.size() + 1; }
};

struct GraphStats {
  int size = 0;
  int diameter = 0;
  int reentrancies = 0;
  bool operator==(const GraphStats&) const = default;
};

struct GraphError : std::runtime_error {
  explicit GraphError(const std::string& m) : std::runtime_error(m) {}
};

void validate(const MultiRelGraph& g);

LeviGraph levi_transform(const MultiRelGraph& g);

class Vocab;
TokenGraph tokenize_graph(const LeviGraph& g, const Vocab& vocab);

JointGraph build_joint_graph(const TokenGraph& g);
// Inverse of build_joint_graph.
TokenGraph strip_context_node(const JointGraph& g);

GraphStats graph_stats(const MultiRelGraph& g);

// Deterministic adjacency listing, sorted by node index, for golden files.
std::string debug_dump(const TokenGraph& g);

}  // namespace g2t
