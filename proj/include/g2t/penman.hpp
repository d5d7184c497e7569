#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "g2t/graph.hpp"

namespace g2t {

enum class PenmanErrorKind { UnbalancedParens, DanglingVariable, EmptyInput };

struct PenmanError : std::runtime_error {
  PenmanError(PenmanErrorKind k, std::size_t off, const std::string& msg)
      : std::runtime_error(msg + " at byte " + std::to_string(off)),
        kind(k),
        offset(off) {}
  PenmanErrorKind kind;
  std::size_t offset;
};

// Parses one PENMAN s-expression: (var / concept :ROLE target ...).
// Concepts and constants become nodes; variable re-references share a node.
MultiRelGraph parse_penman(const std::string& s);

// Round-trip serializer; re-referenced nodes are emitted as variable refs.
std::string to_penman(const MultiRelGraph& g);

struct AmrBlock {
  std::string sentence;  // from the "# ::snt" comment line
  MultiRelGraph graph;
};

// Blank-line-separated blocks; '#' lines are comments, the graph follows.
std::vector<AmrBlock> read_amr_file(const std::string& path);

}  // namespace g2t
