#include <cstring>
#include <fstream>
#include <stdexcept>

#include "postgan/nncore.hpp"

namespace postgan::nn {
namespace {

constexpr char kMagic[4] = {'P', 'G', 'A', 'N'};

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

float read_f32(std::istream& is) {
  const uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const WeightStore<float>& store,
                     const std::string& metadata) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  os.write(kMagic, 4);
  write_u32(os, kCheckpointVersion);
  write_u64(os, metadata.size());
  os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  write_u64(os, store.tensors.size());
  for (const auto& [name, t] : store.tensors) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t.rank()));
    for (const int64_t d : t.shape) write_u32(os, static_cast<uint32_t>(d));
    for (const float v : t.data) write_f32(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

WeightStore<float> load_checkpoint(const std::string& path, std::string* metadata) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic (not a PGAN file): " + path);
  const uint32_t version = read_u32(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const uint64_t meta_len = read_u64(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw std::runtime_error("checkpoint: truncated metadata");
  if (metadata) *metadata = std::move(meta);
  const uint64_t count = read_u64(is);
  WeightStore<float> store;
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw std::runtime_error("checkpoint: truncated tensor name");
    const uint32_t rank = read_u32(is);
    std::vector<int64_t> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = int64_t(read_u32(is));
    Tensor<float> t(shape);
    for (auto& v : t.data) v = read_f32(is);
    store.add(name, std::move(t));
  }
  return store;
}

}  // namespace postgan::nn
