#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace g2t {

// Word-level vocabulary with fixed special ids.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocab();

  int add(const std::string& token);  // no-op if present, returns id
  int id(const std::string& token) const;  // kUnk when missing
  const std::string& token(int id) const;
  int size() const { return (int)id_to_token_.size(); }

  std::vector<int> encode(const std::string& text, bool append_eos) const;
  std::string decode(const std::vector<int>& ids) const;  // skips specials

  void save(const std::string& path) const;  // one token per line, id = line+4
  static Vocab load(const std::string& path);

  bool lowercase = true;

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

std::vector<std::string> split_tokens(const std::string& text, bool lowercase);

// Frequency >= min_freq, ordered by frequency desc then lexicographic.
Vocab build_vocab(const std::vector<std::string>& corpus, int min_freq,
                  bool lowercase = true);

}  // namespace g2t
