#include "backtrack/latent.hpp"

#include <cmath>

#include "backtrack/error.hpp"

namespace backtrack {
namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw IoError(std::string("bad hex digit '") + c + "'");
}

}  // namespace

std::string LatentCode::to_hex() const {
  std::string out;
  out.reserve(digits.size() * 2);
  for (std::uint8_t b : digits) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xf]);
  }
  return out;
}

LatentCode LatentCode::from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw IoError("hex code has odd length");
  std::vector<std::uint8_t> digits(hex.size() / 2);
  for (std::size_t i = 0; i < digits.size(); ++i) {
    digits[i] = static_cast<std::uint8_t>(hex_value(hex[2 * i]) * 16 + hex_value(hex[2 * i + 1]));
  }
  return LatentCode(std::move(digits));
}

Tensor LatentCode::onehot(const LatentShape& shape) const {
  if (size() != shape.groups) {
    throw DimensionError("code has " + std::to_string(size()) + " digits, latent shape expects " +
                         std::to_string(shape.groups));
  }
  Tensor t({1, shape.flat()});
  for (int gi = 0; gi < shape.groups; ++gi) {
    const int cls = digits[static_cast<std::size_t>(gi)];
    if (cls >= shape.classes) throw DimensionError("code digit out of class range");
    t[static_cast<std::size_t>(gi * shape.classes + cls)] = 1.0;
  }
  return t;
}

LatentCode LatentDistribution::sample(Rng& rng) const {
  std::vector<std::uint8_t> digits(static_cast<std::size_t>(shape.groups));
  for (int gi = 0; gi < shape.groups; ++gi) {
    const double* row = probs.data() + static_cast<std::size_t>(gi) * shape.classes;
    digits[static_cast<std::size_t>(gi)] = static_cast<std::uint8_t>(
        rng.categorical(std::span<const double>(row, static_cast<std::size_t>(shape.classes))));
  }
  return LatentCode(std::move(digits));
}

LatentCode LatentDistribution::argmax() const {
  std::vector<std::uint8_t> digits(static_cast<std::size_t>(shape.groups));
  for (int gi = 0; gi < shape.groups; ++gi) {
    const double* row = probs.data() + static_cast<std::size_t>(gi) * shape.classes;
    int best = 0;
    for (int j = 1; j < shape.classes; ++j) {
      if (row[j] > row[best]) best = j;
    }
    digits[static_cast<std::size_t>(gi)] = static_cast<std::uint8_t>(best);
  }
  return LatentCode(std::move(digits));
}

double LatentDistribution::mean_row_entropy() const {
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p > 0.0) total -= p * std::log(p);
  }
  return total / shape.groups;
}

LatentCode OracleCodec::code_for_cell(int cell_index) const {
  if (cell_index < 0) throw ContractViolation("code_for_cell: negative cell index");
  std::vector<std::uint8_t> digits(static_cast<std::size_t>(shape_.groups), 0);
  int rest = cell_index;
  for (int gi = 0; gi < shape_.groups && rest > 0; ++gi) {
    digits[static_cast<std::size_t>(gi)] = static_cast<std::uint8_t>(rest % shape_.classes);
    rest /= shape_.classes;
  }
  if (rest > 0) throw ContractViolation("code_for_cell: cell index exceeds code capacity");
  return LatentCode(std::move(digits));
}

std::optional<int> OracleCodec::cell_for_code(const LatentCode& code) const {
  if (code.size() != shape_.groups) return std::nullopt;
  long long value = 0;
  long long base = 1;
  bool base_saturated = false;
  for (int gi = 0; gi < shape_.groups; ++gi) {
    const int digit = code.digits[static_cast<std::size_t>(gi)];
    if (digit >= shape_.classes) return std::nullopt;
    if (digit != 0) {
      if (base_saturated) return std::nullopt;  // would exceed any valid cell index
      value += base * digit;
    }
    if (base > (1LL << 40)) {
      base_saturated = true;
    } else {
      base *= shape_.classes;
    }
  }
  if (value > std::numeric_limits<int>::max()) return std::nullopt;
  return static_cast<int>(value);
}

}  // namespace backtrack
