#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crossgen/tensor/param_store.hpp"
#include "crossgen/util/key_value.hpp"

namespace crossgen::train {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NamedStore {
  std::string name;  // "model", "generator", "discriminator"
  tensor::StoreState state;
};

struct Checkpoint {
  std::string architecture;
  std::uint32_t epoch = 0;  // completed epochs
  KeyValues config;
  std::string rng_state;
  std::vector<NamedStore> stores;
  KeyValues metadata;  // training log and other run facts

  const tensor::StoreState& store(const std::string& name) const;
};

// Little-endian AICK container:
//   "AICK" | u16 version | str architecture | u32 epoch | u32 n, n x (str key, str value) config
//   | str rng_state | u32 stores, per store: str name | u64 step_count
//       | u32 params, per param: str name | u8 rank | rank x u32 extent | value, m, v as f32
//       | u32 buffers, per buffer: str name | u8 rank | extents | f32 values
//   | u32 n, n x (str key, str value) metadata | u32 CRC32
// Strings carry a u32 length prefix. Written atomically.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

// Verifies the CRC before returning. When `expected_architecture` is
// nonempty a different tag raises.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_architecture = {});

}  // namespace crossgen::train
