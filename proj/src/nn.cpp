#include "backtrack/nn.hpp"

#include <cmath>

#include "backtrack/error.hpp"

namespace backtrack {
namespace {

Tensor init_weight(int fan_in, int fan_out, Rng& rng) {
  Tensor w({fan_in, fan_out});
  const double scale = std::sqrt(1.0 / fan_in);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal() * scale;
  return w;
}

}  // namespace

Mlp::Mlp(const std::string& name, const MlpConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.input <= 0 || cfg.output <= 0 || cfg.hidden <= 0 || cfg.hidden_layers < 0) {
    throw ConfigError("Mlp '" + name + "': non-positive layer size");
  }
  int in = cfg.input;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    const std::string p = name + ".h" + std::to_string(l);
    Block b;
    b.weight = Parameter(p + ".weight", init_weight(in, cfg.hidden, rng));
    b.bias = Parameter(p + ".bias", Tensor::zeros({cfg.hidden}));
    b.ln_gain = Parameter(p + ".ln_gain", Tensor::full({cfg.hidden}, 1.0));
    b.ln_bias = Parameter(p + ".ln_bias", Tensor::zeros({cfg.hidden}));
    blocks_.push_back(std::move(b));
    in = cfg.hidden;
  }
  Tensor w = cfg.zero_init_output ? Tensor::zeros({in, cfg.output}) : init_weight(in, cfg.output, rng);
  out_weight_ = Parameter(name + ".out.weight", std::move(w));
  out_bias_ = Parameter(name + ".out.bias", Tensor::zeros({cfg.output}));
}

Tape::VarId Mlp::forward(Tape& tape, Tape::VarId x) {
  Tape::VarId h = x;
  for (Block& b : blocks_) {
    h = tape.add_rowvec(tape.matmul(h, tape.param(b.weight)), tape.param(b.bias));
    if (cfg_.use_layer_norm) {
      h = tape.layer_norm(h, tape.param(b.ln_gain), tape.param(b.ln_bias));
    }
    h = tape.silu(h);
  }
  return tape.add_rowvec(tape.matmul(h, tape.param(out_weight_)), tape.param(out_bias_));
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (Block& b : blocks_) {
    out.push_back(&b.weight);
    out.push_back(&b.bias);
    if (cfg_.use_layer_norm) {
      out.push_back(&b.ln_gain);
      out.push_back(&b.ln_bias);
    }
  }
  out.push_back(&out_weight_);
  out.push_back(&out_bias_);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> Mlp::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (const Block& b : blocks_) {
    out.emplace_back(b.weight.name, &b.weight.value);
    out.emplace_back(b.bias.name, &b.bias.value);
    if (cfg_.use_layer_norm) {
      out.emplace_back(b.ln_gain.name, &b.ln_gain.value);
      out.emplace_back(b.ln_bias.name, &b.ln_bias.value);
    }
  }
  out.emplace_back(out_weight_.name, &out_weight_.value);
  out.emplace_back(out_bias_.name, &out_bias_.value);
  return out;
}

void Mlp::load_tensors(const std::map<std::string, Tensor>& tensors) {
  for (Parameter* p : parameters()) {
    auto it = tensors.find(p->name);
    if (it == tensors.end()) throw IoError("missing tensor '" + p->name + "' in model file");
    if (it->second.shape() != p->value.shape()) {
      throw DimensionError("tensor '" + p->name + "' has shape " + it->second.shape_str() +
                           ", expected " + p->value.shape_str());
    }
    p->value = it->second;
    p->zero_grad();
  }
}

}  // namespace backtrack
