#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "backtrack/tensor.hpp"

namespace backtrack {

// Parameter bundle file, magic "BTW1": u32 tensor count, then per tensor
// u32 name length, UTF-8 name, u32 rank, u64 dims, raw little-endian f64
// values.
void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& named);

std::map<std::string, Tensor> load_tensors(const std::string& path);

}  // namespace backtrack
