#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "g2t/checkpoint.hpp"
#include "g2t/config.hpp"

using namespace g2t;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 12;
  c.model_dim = 8;
  c.ffn_dim = 16;
  c.adapter_dim = 8;
  c.reenc_dim = 8;
  c.heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.reenc_layers = 1;
  return c;
}

std::string slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& p) : path(p) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("save load save is bit exact") {
  TempFile a("test_ckpt_a.bin"), b("test_ckpt_b.bin");
  Model m1(tiny_config(), 42);
  const std::uint64_t h = config_hash(m1.config());
  save_checkpoint(a.path, m1, {h, 17});

  Model m2(tiny_config(), 999);  // different init, same architecture
  CheckpointMeta meta = load_checkpoint(a.path, m2);
  CHECK(meta.config_hash == h);
  CHECK(meta.step == 17);
  save_checkpoint(b.path, m2, meta);
  CHECK(slurp(a.path) == slurp(b.path));

  // values survive the 32-bit round trip identically on the reload
  for (std::size_t i = 0; i < m1.params().size(); ++i) {
    const auto& p1 = m1.params()[i];
    const auto& p2 = m2.params()[i];
    CHECK(p1.name == p2.name);
    for (std::size_t j = 0; j < p1.tensor->size(); ++j)
      CHECK((float)p1.tensor->value[j] == (float)p2.tensor->value[j]);
  }
}

TEST_CASE("peek reads metadata without a model") {
  TempFile a("test_ckpt_peek.bin");
  Model m(tiny_config(), 1);
  save_checkpoint(a.path, m, {1234, 5});
  CheckpointMeta meta = peek_checkpoint(a.path);
  CHECK(meta.config_hash == 1234);
  CHECK(meta.step == 5);
}

TEST_CASE("architecture mismatch is rejected") {
  TempFile a("test_ckpt_mismatch.bin");
  Model m(tiny_config(), 1);
  save_checkpoint(a.path, m, {0, 0});
  ModelConfig other = tiny_config();
  other.model_dim = 16;
  other.reenc_dim = 16;
  Model m2(other, 1);
  CHECK_THROWS(load_checkpoint(a.path, m2));
}

TEST_CASE("config hash separates model variants") {
  ModelConfig a = tiny_config();
  ModelConfig b = tiny_config();
  CHECK(config_hash(a) == config_hash(b));
  b.use_node_gates = false;
  CHECK(config_hash(a) != config_hash(b));
}
