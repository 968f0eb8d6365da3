#include "crossgen/train/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "crossgen/util/binary_io.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen::train {
namespace {

constexpr std::uint8_t kMaxRank = 8;

void write_shape(BinaryWriter& w, const tensor::Shape& shape) {
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) w.u32(static_cast<std::uint32_t>(d));
}

tensor::Tensor read_tensor(BinaryReader& r, const char* what) {
  const auto rank = r.u8("rank");
  if (rank == 0 || rank > kMaxRank) throw ParseError(std::string("checkpoint: bad rank for ") + what);
  tensor::Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    d = r.u32("extent");
    if (d == 0) throw ParseError(std::string("checkpoint: zero extent for ") + what);
    count *= d;
    if (count > (1ull << 28)) throw ParseError(std::string("checkpoint: tensor too large for ") + what);
  }
  tensor::Tensor t(shape);
  r.f32s(t.data(), what);
  return t;
}

void write_kv(BinaryWriter& w, const KeyValues& kv) {
  w.u32(static_cast<std::uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    w.str(k);
    w.str(v);
  }
}

KeyValues read_kv(BinaryReader& r, const char* what) {
  const auto n = r.u32(what);
  KeyValues kv;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto k = r.str("key", 1u << 16);
    auto v = r.str("value", 1u << 20);
    kv.emplace_back(std::move(k), std::move(v));
  }
  return kv;
}

}  // namespace

const tensor::StoreState& Checkpoint::store(const std::string& name) const {
  for (const auto& s : stores)
    if (s.name == name) return s.state;
  throw Error("checkpoint has no parameter store '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file_atomically(path, [&](std::ostream& out) {
    BinaryWriter w(out);
    w.bytes({reinterpret_cast<const std::uint8_t*>("AICK"), 4});
    w.u16(kCheckpointVersion);
    w.str(ck.architecture);
    w.u32(ck.epoch);
    write_kv(w, ck.config);
    w.str(ck.rng_state);
    w.u32(static_cast<std::uint32_t>(ck.stores.size()));
    for (const auto& [name, state] : ck.stores) {
      w.str(name);
      w.u64(state.step_count);
      w.u32(static_cast<std::uint32_t>(state.params.size()));
      for (std::size_t i = 0; i < state.params.size(); ++i) {
        const auto& p = state.params[i];
        if (state.moments_m[i].value.shape() != p.value.shape() || state.moments_v[i].value.shape() != p.value.shape()) {
          throw Error("checkpoint: moment shape mismatch for " + p.name);
        }
        w.str(p.name);
        write_shape(w, p.value.shape());
        w.f32s(p.value.data());
        w.f32s(state.moments_m[i].value.data());
        w.f32s(state.moments_v[i].value.data());
      }
      w.u32(static_cast<std::uint32_t>(state.buffers.size()));
      for (const auto& b : state.buffers) {
        w.str(b.name);
        write_shape(w, b.value.shape());
        w.f32s(b.value.data());
      }
    }
    write_kv(w, ck.metadata);
    w.crc_trailer();
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_architecture) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  BinaryReader r(in, path.string());
  std::uint8_t magic[4];
  r.bytes(magic, "magic");
  if (std::memcmp(magic, "AICK", 4) != 0) throw ParseError(path.string() + ": bad magic (not a checkpoint)");
  if (const auto v = r.u16("version"); v != kCheckpointVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint ck;
  ck.architecture = r.str("architecture", 256);
  if (!expected_architecture.empty() && ck.architecture != expected_architecture) {
    throw Error(path.string() + ": checkpoint architecture is '" + ck.architecture + "', expected '" +
                expected_architecture + "'");
  }
  ck.epoch = r.u32("epoch");
  ck.config = read_kv(r, "config");
  ck.rng_state = r.str("rng_state", 1u << 16);
  const auto n_stores = r.u32("store count");
  for (std::uint32_t s = 0; s < n_stores; ++s) {
    NamedStore ns;
    ns.name = r.str("store name", 256);
    ns.state.step_count = r.u64("step_count");
    const auto n_params = r.u32("parameter count");
    for (std::uint32_t i = 0; i < n_params; ++i) {
      auto name = r.str("parameter name", 1024);
      auto value = read_tensor(r, "parameter");
      tensor::Tensor m(value.shape()), v(value.shape());
      r.f32s(m.data(), "adam m");
      r.f32s(v.data(), "adam v");
      ns.state.params.push_back({name, std::move(value)});
      ns.state.moments_m.push_back({name, std::move(m)});
      ns.state.moments_v.push_back({name, std::move(v)});
    }
    const auto n_buffers = r.u32("buffer count");
    for (std::uint32_t i = 0; i < n_buffers; ++i) {
      auto name = r.str("buffer name", 1024);
      ns.state.buffers.push_back({std::move(name), read_tensor(r, "buffer")});
    }
    ck.stores.push_back(std::move(ns));
  }
  ck.metadata = read_kv(r, "metadata");
  r.verify_crc_trailer();
  r.expect_eof();
  return ck;
}

}  // namespace crossgen::train
