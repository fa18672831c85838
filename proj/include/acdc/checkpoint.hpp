#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "acdc/nn.hpp"

// Versioned binary checkpoint of named parameter blocks.
//
// Layout (little-endian):
//   magic "ACDCCKPT" | u32 version | u32 n_meta | n_meta x (str key, str value)
//   | u32 n_blocks | n_blocks x (str name, u64 rows, u64 cols, rows*cols f64 column-major)
// where str = u32 length followed by raw bytes.
namespace acdc::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedMatrix {
  std::string name;
  Mat value;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<NamedMatrix> blocks;

  const NamedMatrix* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const std::map<std::string, std::string>& meta,
                     const ParamList& blocks);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies every target block from the checkpoint by name. Missing names or
// shape mismatches throw std::runtime_error.
void restore_blocks(const Checkpoint& checkpoint, const ParamList& targets);

}  // namespace acdc::nn
