#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bda/model.hpp"
#include "bda/tensor.hpp"

namespace bda {

// Binary checkpoint, little-endian:
//   "BDACKPT\0"  u32 version (=1)
//   u32 config_len, config text (key=value lines)
//   u32 array_count, then per array:
//     u32 name_len, name, u32 rank, u64 dims[rank], f64 data[numel]
// Parameters appear in Model::parameters() order, so the bytes are a pure
// function of the parameter values and the config text.
struct NamedArray {
  std::string name;
  Tensor value;
};

struct CheckpointData {
  std::string config_text;
  std::vector<NamedArray> arrays;
};

std::string encode_checkpoint(const CheckpointData& ck);
CheckpointData decode_checkpoint(const std::string& bytes);

CheckpointData snapshot(const Model& model, std::string config_text);
// Copies values into the model by name. Throws DataError on missing names or
// shape mismatches.
void restore(Model& model, const CheckpointData& ck);

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);
std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace bda
