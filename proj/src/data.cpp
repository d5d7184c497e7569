#include "g2t/data.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <json.hpp>

namespace g2t {

using nlohmann::json;

std::vector<Example> read_kg_records(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("read_kg_records: cannot open " + path);
  std::vector<Example> out;
  std::string line;
  long long lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("MalformedRecord(line " + std::to_string(lineno) +
                      "): " + e.what());
    }
    if (!j.is_object() || !j.contains("nodes") || !j.contains("triples") ||
        !j.contains("text") || !j["nodes"].is_array() ||
        !j["triples"].is_array() || !j["text"].is_string())
      throw DataError("MalformedRecord(line " + std::to_string(lineno) + ")");
    Example ex;
    for (const auto& n : j["nodes"]) {
      if (!n.is_string())
        throw DataError("MalformedRecord(line " + std::to_string(lineno) +
                        "): non-string node");
      ex.graph.nodes.push_back(n.get<std::string>());
    }
    const int nn = (int)ex.graph.nodes.size();
    for (const auto& t : j["triples"]) {
      if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() ||
          !t[1].is_string() || !t[2].is_number_integer())
        throw DataError("MalformedRecord(line " + std::to_string(lineno) +
                        "): bad triple");
      const int h = t[0].get<int>(), tl = t[2].get<int>();
      if (h < 0 || h >= nn || tl < 0 || tl >= nn)
        throw DataError("IndexOutOfRange(line " + std::to_string(lineno) + ")");
      ex.graph.triples.push_back({h, t[1].get<std::string>(), tl});
    }
    ex.target_text = j["text"].get<std::string>();
    out.push_back(std::move(ex));
  }
  return out;
}

void write_kg_records(const std::string& path,
                      const std::vector<Example>& examples) {
  std::ofstream f(path);
  if (!f) throw DataError("write_kg_records: cannot open " + path);
  for (const auto& ex : examples) {
    json j;
    j["nodes"] = ex.graph.nodes;
    json triples = json::array();
    for (const auto& t : ex.graph.triples)
      triples.push_back(json::array({t.head, t.relation, t.tail}));
    j["triples"] = triples;
    j["text"] = ex.target_text;
    f << j.dump() << '\n';
  }
}

void encode_targets(std::vector<Example>& examples, const Vocab& vocab) {
  for (auto& ex : examples) ex.target_ids = vocab.encode(ex.target_text, true);
}

std::vector<Batch> make_batches(const std::vector<Example>& examples,
                                int batch_size, std::uint64_t shuffle_seed) {
  if (batch_size < 1) throw DataError("make_batches: batch_size < 1");
  std::vector<int> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> out;
  for (std::size_t b = 0; b < order.size(); b += batch_size) {
    Batch batch;
    const std::size_t end = std::min(order.size(), b + batch_size);
    for (std::size_t i = b; i < end; ++i) {
      batch.example_ids.push_back(order[i]);
      batch.max_len = std::max(batch.max_len,
                               (int)examples[order[i]].target_ids.size());
    }
    for (int id : batch.example_ids) {
      const auto& ids = examples[id].target_ids;
      std::vector<int> padded(batch.max_len, Vocab::kPad);
      std::vector<std::uint8_t> mask(batch.max_len, 0);
      std::copy(ids.begin(), ids.end(), padded.begin());
      std::fill(mask.begin(), mask.begin() + ids.size(), 1);
      batch.target_ids.push_back(std::move(padded));
      batch.target_mask.push_back(std::move(mask));
    }
    out.push_back(std::move(batch));
  }
  return out;
}

namespace {
void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)(v >> 8 & 0xff),
                        (unsigned char)(v >> 16 & 0xff),
                        (unsigned char)(v >> 24 & 0xff)};
  os.write((const char*)b, 4);
}
std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read((char*)b, 4);
  if (!is) throw DataError("load_dataset: truncated file");
  return (std::uint32_t)b[0] | (std::uint32_t)b[1] << 8 |
         (std::uint32_t)b[2] << 16 | (std::uint32_t)b[3] << 24;
}
void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, (std::uint32_t)s.size());
  os.write(s.data(), (std::streamsize)s.size());
}
std::string get_str(std::istream& is) {
  std::string s(get_u32(is), '\0');
  is.read(s.data(), (std::streamsize)s.size());
  if (!is) throw DataError("load_dataset: truncated file");
  return s;
}
constexpr std::uint32_t kMagic = 0x47325444;  // "G2TD"
}  // namespace

void save_dataset(const std::string& path,
                  const std::vector<Example>& examples) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("save_dataset: cannot open " + path);
  put_u32(f, kMagic);
  put_u32(f, 1);  // version
  put_u32(f, (std::uint32_t)examples.size());
  for (const auto& ex : examples) {
    put_u32(f, (std::uint32_t)ex.graph.nodes.size());
    for (const auto& n : ex.graph.nodes) put_str(f, n);
    put_u32(f, (std::uint32_t)ex.graph.triples.size());
    for (const auto& t : ex.graph.triples) {
      put_u32(f, (std::uint32_t)t.head);
      put_str(f, t.relation);
      put_u32(f, (std::uint32_t)t.tail);
    }
    put_str(f, ex.target_text);
    put_u32(f, (std::uint32_t)ex.target_ids.size());
    for (int id : ex.target_ids) put_u32(f, (std::uint32_t)id);
  }
}

std::vector<Example> load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_dataset: cannot open " + path);
  if (get_u32(f) != kMagic) throw DataError("load_dataset: bad magic");
  if (get_u32(f) != 1) throw DataError("load_dataset: unsupported version");
  std::vector<Example> out(get_u32(f));
  for (auto& ex : out) {
    ex.graph.nodes.resize(get_u32(f));
    for (auto& n : ex.graph.nodes) n = get_str(f);
    ex.graph.triples.resize(get_u32(f));
    for (auto& t : ex.graph.triples) {
      t.head = (int)get_u32(f);
      t.relation = get_str(f);
      t.tail = (int)get_u32(f);
    }
    ex.target_text = get_str(f);
    ex.target_ids.resize(get_u32(f));
    for (auto& id : ex.target_ids) id = (int)get_u32(f);
  }
  return out;
}

}  // namespace g2t
