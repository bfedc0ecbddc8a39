#include "backtrack/serialize.hpp"

#include "backtrack/io.hpp"

namespace backtrack {

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& named) {
  BinaryWriter w(path);
  w.magic("BTW1");
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(tensor->rank()));
    for (int d : tensor->shape()) w.u64(static_cast<std::uint64_t>(d));
    for (double v : tensor->values()) w.f64(v);
  }
  w.close();
}

std::map<std::string, Tensor> load_tensors(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("BTW1");
  const std::uint32_t count = r.u32();
  std::map<std::string, Tensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    std::vector<int> shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.u64());
    Tensor t(shape);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = r.f64();
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace backtrack
