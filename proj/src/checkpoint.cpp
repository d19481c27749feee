#include "diver/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace diver {
namespace {

constexpr char kMagic[8] = {'D', 'I', 'V', 'R', 'C', 'K', 'P', '1'};
constexpr char kTrailerMagic[8] = {'T', 'R', 'N', 'S', 'T', 'A', 'T', 'E'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("checkpoint truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw IoError("checkpoint truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& in) {
  uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double get_f64(std::istream& in) {
  uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void read_header(std::istream& in, uint64_t& hash, uint64_t& step, uint32_t& n_tensors) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("not a checkpoint file");
  uint32_t version = get_u32(in);
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  hash = get_u64(in);
  step = get_u64(in);
  n_tensors = get_u32(in);
}

}  // namespace

void save_checkpoint(const std::string& path, const DenoiserParams& params,
                     uint64_t config_hash, uint64_t step, const TrainState* state) {
  auto tensors = params.tensors();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");

  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u64(out, config_hash);
  put_u64(out, step);
  put_u32(out, static_cast<uint32_t>(tensors.size()));

  uint64_t offset = 0;
  for (const Tensor* t : tensors) {
    put_u32(out, static_cast<uint32_t>(t->name.size()));
    out.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
    put_u32(out, static_cast<uint32_t>(t->shape.size()));
    for (size_t d : t->shape) put_u64(out, static_cast<uint64_t>(d));
    put_u64(out, offset);
    offset += 4 * t->w.size();
  }
  put_u64(out, offset);
  for (const Tensor* t : tensors)
    for (double w : t->w) put_f32(out, static_cast<float>(w));

  if (state) {
    out.write(kTrailerMagic, 8);
    for (const Tensor* t : tensors)
      for (double w : t->w) put_f64(out, w);
    if (state->opt.m.size() != tensors.size() || state->opt.v.size() != tensors.size())
      throw InvalidDim("optimizer state does not match parameter set");
    for (size_t i = 0; i < tensors.size(); ++i)
      for (double m : state->opt.m[i]) put_f64(out, m);
    for (size_t i = 0; i < tensors.size(); ++i)
      for (double v : state->opt.v[i]) put_f64(out, v);
    put_u64(out, static_cast<uint64_t>(state->opt.t));
    put_u64(out, state->baseline_init ? 1 : 0);
    put_f64(out, state->baseline);
  }
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

uint64_t checkpoint_config_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  uint64_t hash, step;
  uint32_t n;
  read_header(in, hash, step, n);
  return hash;
}

uint64_t load_checkpoint(const std::string& path, DenoiserParams& params,
                         uint64_t expected_hash, TrainState* state) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  uint64_t hash, step;
  uint32_t n_tensors;
  read_header(in, hash, step, n_tensors);
  if (hash != expected_hash)
    throw ConfigMismatch("checkpoint was produced under a different configuration");

  auto tensors = params.tensors();
  if (n_tensors != tensors.size()) throw InvalidDim("checkpoint tensor count mismatch");

  for (Tensor* t : tensors) {
    uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("checkpoint truncated");
    if (name != t->name) throw InvalidDim("tensor order mismatch: expected " + t->name + ", found " + name);
    uint32_t ndims = get_u32(in);
    std::vector<size_t> shape(ndims);
    for (uint32_t d = 0; d < ndims; ++d) shape[d] = static_cast<size_t>(get_u64(in));
    if (shape != t->shape) throw InvalidDim("tensor shape mismatch for " + name);
    get_u64(in);  // offset, implied by order
  }
  uint64_t blob_size = get_u64(in);
  uint64_t expect = 0;
  for (const Tensor* t : tensors) expect += 4 * t->w.size();
  if (blob_size != expect) throw IoError("checkpoint blob size mismatch");

  for (Tensor* t : tensors)
    for (double& w : t->w) w = static_cast<double>(get_f32(in));

  if (state) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kTrailerMagic, 8) != 0)
      throw IoError("checkpoint has no training state, cannot resume");
    for (Tensor* t : tensors)
      for (double& w : t->w) w = get_f64(in);
    state->opt.init(params);
    for (size_t i = 0; i < tensors.size(); ++i)
      for (double& m : state->opt.m[i]) m = get_f64(in);
    for (size_t i = 0; i < tensors.size(); ++i)
      for (double& v : state->opt.v[i]) v = get_f64(in);
    state->opt.t = static_cast<long>(get_u64(in));
    state->baseline_init = get_u64(in) != 0;
    state->baseline = get_f64(in);
    state->step = step;
  }
  return step;
}

}  // namespace diver
