#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "backtrack/autodiff.hpp"
#include "backtrack/rng.hpp"

namespace backtrack {

struct MlpConfig {
  int input = 0;
  int output = 0;
  int hidden = 256;
  int hidden_layers = 2;
  bool use_layer_norm = true;
  // Zero logits at init give uniform softmax heads, which every consumer in
  // this pipeline wants as a starting point.
  bool zero_init_output = true;
};

// Feed-forward block: (linear -> layer norm -> SiLU) x hidden_layers, then a
// plain linear head.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const MlpConfig& cfg, Rng& rng);

  Tape::VarId forward(Tape& tape, Tape::VarId x);  // [B x input] -> [B x output]

  std::vector<Parameter*> parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  void load_tensors(const std::map<std::string, Tensor>& tensors);

  const MlpConfig& config() const { return cfg_; }

 private:
  struct Block {
    Parameter weight;   // [in x out]
    Parameter bias;     // [out]
    Parameter ln_gain;  // [out]
    Parameter ln_bias;  // [out]
  };

  MlpConfig cfg_;
  std::vector<Block> blocks_;
  Parameter out_weight_;
  Parameter out_bias_;
};

}  // namespace backtrack
