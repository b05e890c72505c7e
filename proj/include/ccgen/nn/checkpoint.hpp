#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "ccgen/nn/tensor.hpp"

namespace ccgen::nn {

// On-disk layout:
//   "CCF1"                          magic
//   u32 little-endian               manifest byte length
//   manifest (UTF-8 text lines):
//     version 1
//     meta <key> <value...>         zero or more
//     tensor <name> f32 <offset> <rank> <dim>...
//   blob                            little-endian IEEE-754 float32, row-major
//
// Tensor offsets are byte offsets into the blob; tensors are stored
// back-to-back in manifest order.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ParamStore<float> params;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(std::ostream& out, const ParamStore<float>& params,
                     const std::map<std::string, std::string>& meta = {});
void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params,
                     const std::map<std::string, std::string>& meta = {});

// Throws FormatError on bad magic, version mismatch, corrupt manifest or
// truncated blob.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ccgen::nn
