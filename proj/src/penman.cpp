#include "g2t/penman.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace g2t {

namespace {

struct Token {
  enum Kind { LParen, RParen, Slash, Role, Atom, End } kind;
  std::string text;
  std::size_t offset;
};

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) {}

  Token next() {
    while (pos_ < s_.size() && std::isspace((unsigned char)s_[pos_])) ++pos_;
    const std::size_t off = pos_;
    if (pos_ >= s_.size()) return {Token::End, "", off};
    const char c = s_[pos_];
    if (c == '(') { ++pos_; return {Token::LParen, "(", off}; }
    if (c == ')') { ++pos_; return {Token::RParen, ")", off}; }
    if (c == '/') { ++pos_; return {Token::Slash, "/", off}; }
    if (c == '"') {
      std::string t;
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] != '"') t += s_[pos_++];
      if (pos_ < s_.size()) ++pos_;  // closing quote
      return {Token::Atom, t, off};
    }
    std::string t;
    const bool role = c == ':';
    while (pos_ < s_.size() && !std::isspace((unsigned char)s_[pos_]) &&
           s_[pos_] != '(' && s_[pos_] != ')' && s_[pos_] != '/')
      t += s_[pos_++];
    if (role) return {Token::Role, t.substr(1), off};
    return {Token::Atom, t, off};
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

bool looks_like_variable(const std::string& a) {
  if (a.empty() || !std::islower((unsigned char)a[0])) return false;
  for (std::size_t i = 1; i < a.size(); ++i)
    if (!std::isdigit((unsigned char)a[i])) return false;
  return true;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : lex_(s), input_(s) {
    // Pre-scan variable definitions so forward references resolve.
    Lexer scan(s);
    Token prev = scan.next();
    for (Token t = scan.next(); t.kind != Token::End; t = scan.next()) {
      if (prev.kind == Token::LParen && t.kind == Token::Atom)
        defined_.insert({t.text, -1});
      prev = t;
    }
    cur_ = lex_.next();
  }

  MultiRelGraph parse() {
    if (cur_.kind == Token::End)
      throw PenmanError(PenmanErrorKind::EmptyInput, 0, "EmptyInput");
    if (cur_.kind != Token::LParen)
      throw PenmanError(PenmanErrorKind::UnbalancedParens, cur_.offset,
                        "UnbalancedParens: expected '('");
    parse_node();
    if (cur_.kind != Token::End)
      throw PenmanError(PenmanErrorKind::UnbalancedParens, cur_.offset,
                        "UnbalancedParens: trailing input");
    return g_;
  }

 private:
  void advance() { cur_ = lex_.next(); }

  void expect(Token::Kind k, const char* what) {
    if (cur_.kind != k)
      throw PenmanError(PenmanErrorKind::UnbalancedParens, cur_.offset,
                        std::string("UnbalancedParens: expected ") + what);
    advance();
  }

  int parse_node() {
    expect(Token::LParen, "'('");
    if (cur_.kind != Token::Atom)
      throw PenmanError(PenmanErrorKind::UnbalancedParens, cur_.offset,
                        "UnbalancedParens: expected variable");
    const std::string var = cur_.text;
    advance();
    expect(Token::Slash, "'/'");
    if (cur_.kind != Token::Atom)
      throw PenmanError(PenmanErrorKind::UnbalancedParens, cur_.offset,
                        "UnbalancedParens: expected concept");
    const int node = new_node(cur_.text);
    defined_[var] = node;
    advance();
    while (cur_.kind == Token::Role) {
      const std::string role = cur_.text;
      const std::size_t role_off = cur_.offset;
      advance();
      int target;
      if (cur_.kind == Token::LParen) {
        target = parse_node();
      } else if (cur_.kind == Token::Atom) {
        target = resolve_atom(cur_.text, cur_.offset);
        advance();
      } else {
        throw PenmanError(PenmanErrorKind::UnbalancedParens, role_off,
                          "UnbalancedParens: role without target");
      }
      g_.triples.push_back({node, role, target});
    }
    if (cur_.kind != Token::RParen)
      throw PenmanError(PenmanErrorKind::UnbalancedParens,
                        cur_.kind == Token::End ? input_.size() : cur_.offset,
                        "UnbalancedParens: expected ')'");
    advance();
    return node;
  }

  int resolve_atom(const std::string& a, std::size_t off) {
    auto it = defined_.find(a);
    if (it != defined_.end()) {
      if (it->second < 0) {
        // Defined later in the input; resolve lazily.
        pending_.push_back({a, (int)g_.nodes.size(), off});
        return new_node("<fwd:" + a + ">");
      }
      return it->second;
    }
    if (looks_like_variable(a))
      throw PenmanError(PenmanErrorKind::DanglingVariable, off,
                        "DanglingVariable: '" + a + "'");
    return new_node(a);  // constant
  }

  int new_node(std::string label) {
    g_.nodes.push_back(std::move(label));
    return (int)g_.nodes.size() - 1;
  }

  Lexer lex_;
  const std::string& input_;
  Token cur_{Token::End, "", 0};
  MultiRelGraph g_;
  std::map<std::string, int> defined_;
  struct Pending { std::string var; int placeholder; std::size_t offset; };
  std::vector<Pending> pending_;

 public:
  const MultiRelGraph& graph() const { return g_; }

  void resolve_pending() {
    for (const auto& p : pending_) {
      const int real = defined_.at(p.var);
      if (real < 0)
        throw PenmanError(PenmanErrorKind::DanglingVariable, p.offset,
                          "DanglingVariable: '" + p.var + "'");
      for (auto& t : g_.triples) {
        if (t.head == p.placeholder) t.head = real;
        if (t.tail == p.placeholder) t.tail = real;
      }
    }
    // Drop placeholder nodes (descending index keeps remaps simple).
    for (auto it = pending_.rbegin(); it != pending_.rend(); ++it) {
      g_.nodes.erase(g_.nodes.begin() + it->placeholder);
      for (auto& t : g_.triples) {
        if (t.head > it->placeholder) t.head--;
        if (t.tail > it->placeholder) t.tail--;
      }
    }
  }
};

}  // namespace

MultiRelGraph parse_penman(const std::string& s) {
  Parser p(s);
  p.parse();
  p.resolve_pending();
  return p.graph();
}

std::string to_penman(const MultiRelGraph& g) {
  validate(g);
  const int n = (int)g.nodes.size();
  std::vector<int> indeg(n, 0);
  for (const auto& t : g.triples) indeg[t.tail]++;
  int root = 0;
  for (int v = 0; v < n; ++v)
    if (indeg[v] == 0) { root = v; break; }
  std::vector<std::vector<std::pair<std::string, int>>> out(n);
  for (const auto& t : g.triples) out[t.head].push_back({t.relation, t.tail});
  std::vector<bool> emitted(n, false);
  std::ostringstream os;
  auto quote = [](const std::string& s) {
    for (char c : s)
      if (std::isspace((unsigned char)c) || c == '(' || c == ')' || c == '/')
        return '"' + s + '"';
    return s;
  };
  std::function<void(int)> emit = [&](int v) {
    if (emitted[v]) {
      os << "v" << v;
      return;
    }
    emitted[v] = true;
    os << "(v" << v << " / " << quote(g.nodes[v]);
    for (const auto& [role, tail] : out[v]) {
      os << " :" << role << " ";
      emit(tail);
    }
    os << ")";
  };
  emit(root);
  return os.str();
}

std::vector<AmrBlock> read_amr_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_amr_file: cannot open " + path);
  std::vector<AmrBlock> blocks;
  std::string line, sentence, graph_text;
  auto flush = [&]() {
    if (graph_text.find_first_not_of(" \t\n") == std::string::npos) {
      graph_text.clear();
      sentence.clear();
      return;
    }
    AmrBlock b;
    b.sentence = sentence;
    b.graph = parse_penman(graph_text);
    blocks.push_back(std::move(b));
    graph_text.clear();
    sentence.clear();
  };
  while (std::getline(f, line)) {
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      const std::string tag = "# ::snt ";
      if (line.rfind(tag, 0) == 0) sentence = line.substr(tag.size());
      continue;
    }
    graph_text += line;
    graph_text += '\n';
  }
  flush();
  return blocks;
}

}  // namespace g2t
