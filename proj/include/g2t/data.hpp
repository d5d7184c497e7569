#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "g2t/graph.hpp"
#include "g2t/vocab.hpp"

namespace g2t {

struct Example {
  MultiRelGraph graph;
  std::string target_text;
  std::vector<int> target_ids;  // ends with eos
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

// Line-delimited {"nodes": [...], "triples": [[h, r, t], ...], "text": "..."}.
std::vector<Example> read_kg_records(const std::string& path);
void write_kg_records(const std::string& path,
                      const std::vector<Example>& examples);

// Fill target_ids from target_text.
void encode_targets(std::vector<Example>& examples, const Vocab& vocab);

struct Batch {
  std::vector<int> example_ids;              // indices into the dataset
  std::vector<std::vector<int>> target_ids;  // padded to batch max length
  std::vector<std::vector<std::uint8_t>> target_mask;  // 1 = real token
  int max_len = 0;
};

std::vector<Batch> make_batches(const std::vector<Example>& examples,
                                int batch_size, std::uint64_t shuffle_seed);

// Compact binary dataset: graphs, target text and ids, round-trip exact.
void save_dataset(const std::string& path, const std::vector<Example>& examples);
std::vector<Example> load_dataset(const std::string& path);

}  // namespace g2t
