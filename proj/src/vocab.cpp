#include "g2t/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace g2t {

namespace {
std::string lower(std::string s) {
  for (char& c : s) c = (char)std::tolower((unsigned char)c);
  return s;
}
}  // namespace

Vocab::Vocab() {
  for (const char* s : {"<pad>", "<s>", "</s>", "<unk>"}) add(s);
}

int Vocab::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int id = (int)id_to_token_.size();
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  return id;
}

int Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int i) const {
  if (i < 0 || i >= size())
    throw std::out_of_range("Vocab::token: id " + std::to_string(i));
  return id_to_token_[i];
}

std::vector<std::string> split_tokens(const std::string& text, bool lowercase) {
  std::vector<std::string> out;
  std::istringstream is(lowercase ? lower(text) : text);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<int> Vocab::encode(const std::string& text, bool append_eos) const {
  std::vector<int> ids;
  for (const auto& tok : split_tokens(text, lowercase)) ids.push_back(id(tok));
  if (append_eos) ids.push_back(kEos);
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int i : ids) {
    if (i <= kUnk && i != kUnk) continue;  // pad/bos/eos dropped, unk kept
    if (!out.empty()) out += ' ';
    out += token(i);
  }
  return out;
}

void Vocab::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("Vocab::save: cannot open " + path);
  for (int i = kUnk + 1; i < size(); ++i) f << id_to_token_[i] << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("Vocab::load: cannot open " + path);
  Vocab v;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) v.add(line);
  return v;
}

Vocab build_vocab(const std::vector<std::string>& corpus, int min_freq,
                  bool lowercase) {
  std::map<std::string, long long> freq;
  for (const auto& text : corpus)
    for (const auto& tok : split_tokens(text, lowercase)) freq[tok]++;
  std::vector<std::pair<std::string, long long>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  v.lowercase = lowercase;
  for (const auto& [tok, count] : items)
    if (count >= min_freq) v.add(tok);
  return v;
}

}  // namespace g2t
