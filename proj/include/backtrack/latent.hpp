#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "backtrack/rng.hpp"
#include "backtrack/tensor.hpp"

namespace backtrack {

// g independent c-way categoricals; the state currency of the world model.
struct LatentShape {
  int groups = 16;   // g
  int classes = 16;  // c

  int flat() const { return groups * classes; }
  bool operator==(const LatentShape&) const = default;
};

// One class index per categorical. Equality and hashing are exact: codes are
// graph node identities. Classes are stored as bytes, so c <= 256.
struct LatentCode {
  std::vector<std::uint8_t> digits;

  LatentCode() = default;
  explicit LatentCode(std::vector<std::uint8_t> d) : digits(std::move(d)) {}

  int size() const { return static_cast<int>(digits.size()); }
  bool operator==(const LatentCode&) const = default;

  std::string to_hex() const;
  static LatentCode from_hex(const std::string& hex);

  // Flattened g*c one-hot row, the network input encoding of a code.
  Tensor onehot(const LatentShape& shape) const;
};

struct LatentCodeHash {
  std::size_t operator()(const LatentCode& code) const {
    std::size_t h = 1469598103934665603ULL;
    for (std::uint8_t b : code.digits) {
      h ^= b;
      h *= 1099511628211ULL;
    }
    return h;
  }
};

// g x c row-stochastic matrix over latent classes.
struct LatentDistribution {
  LatentShape shape;
  Tensor probs;  // [g x c]

  // Per-row draw.
  LatentCode sample(Rng& rng) const;
  // Row-wise argmax, ties to the lowest index; the canonical node identity.
  LatentCode argmax() const;
  // Mean Shannon entropy per row, in nats.
  double mean_row_entropy() const;
};

// Bypass encoder used in oracle mode: maps a cell index to a fixed distinct
// code (base-c digits of the index) and back. Lets the downstream pipeline
// be tested independently of representation learning.
class OracleCodec {
 public:
  explicit OracleCodec(LatentShape shape) : shape_(shape) {}

  LatentCode code_for_cell(int cell_index) const;
  std::optional<int> cell_for_code(const LatentCode& code) const;
  const LatentShape& shape() const { return shape_; }

 private:
  LatentShape shape_;
};

}  // namespace backtrack
