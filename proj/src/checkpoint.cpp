#include "g2t/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace g2t {

namespace {

constexpr char kMagic[4] = {'G', '2', 'T', 'C'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff),
                        (unsigned char)(v >> 8 & 0xff),
                        (unsigned char)(v >> 16 & 0xff),
                        (unsigned char)(v >> 24 & 0xff)};
  os.write((const char*)b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, (std::uint32_t)(v & 0xffffffffull));
  put_u32(os, (std::uint32_t)(v >> 32));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read((char*)b, 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return (std::uint32_t)b[0] | (std::uint32_t)b[1] << 8 |
         (std::uint32_t)b[2] << 16 | (std::uint32_t)b[3] << 24;
}

std::uint64_t get_u64(std::istream& is) {
  const std::uint64_t lo = get_u32(is);
  return lo | (std::uint64_t)get_u32(is) << 32;
}

void put_f32(std::ostream& os, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(os, u);
}

float get_f32(std::istream& is) {
  const std::uint32_t u = get_u32(is);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const CheckpointMeta& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(kMagic, 4);
  put_u32(f, 1);  // version
  put_u64(f, meta.config_hash);
  put_u64(f, (std::uint64_t)meta.step);
  put_u32(f, (std::uint32_t)model.params().size());
  for (const auto& p : model.params()) {
    put_u32(f, (std::uint32_t)p.name.size());
    f.write(p.name.data(), (std::streamsize)p.name.size());
    put_u32(f, (std::uint32_t)p.tensor->shape.size());
    for (int d : p.tensor->shape) put_u32(f, (std::uint32_t)d);
    for (double v : p.tensor->value) put_f32(f, (float)v);
  }
}

CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  if (get_u32(f) != 1)
    throw std::runtime_error("load_checkpoint: unsupported version");
  CheckpointMeta meta;
  meta.config_hash = get_u64(f);
  meta.step = (long long)get_u64(f);
  return meta;
}

CheckpointMeta load_checkpoint(const std::string& path, Model& model) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  if (get_u32(f) != 1)
    throw std::runtime_error("load_checkpoint: unsupported version");
  CheckpointMeta meta;
  meta.config_hash = get_u64(f);
  meta.step = (long long)get_u64(f);
  const std::uint32_t count = get_u32(f);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get_u32(f), '\0');
    f.read(name.data(), (std::streamsize)name.size());
    std::vector<int> shape(get_u32(f));
    for (auto& d : shape) d = (int)get_u32(f);
    Tensor t = model.param(name);
    if (t->shape != shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    for (auto& v : t->value) v = (double)get_f32(f);
  }
  return meta;
}

}  // namespace g2t
