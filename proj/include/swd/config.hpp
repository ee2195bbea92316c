#pragma once

#include <array>
#include <map>
#include <sstream>
#include <string>

#include "swd/model.hpp"
#include "swd/sample_io.hpp"

namespace swd {

struct TrainConfig {
  std::string data_dir;
  std::string out_checkpoint = "checkpoint.swdckpt";
  std::string log_csv;
  double lr = 1e-4;
  int epochs = 70;
  int batch = 3;
  uint64_t seed = 0;
  std::string variant = "default";
  double alpha = 5e-4;
  std::array<double, 4> lambda{1.0, 0.5, 0.4, 1.0};
  int width = 96;
  int height = 48;
  int stem_channels = 8;
  std::array<int, 3> channels{16, 32, 64};
  uint64_t extractor_seed = 0;
  int save_every = 0;  // epochs between checkpoints; 0 = final only
  bool augment = true;
  bool deterministic = true;

  // Learning-rate drop generalizes the 50-of-70 schedule.
  int decay_epoch() const {
    return static_cast<int>(std::lround(static_cast<double>(epochs) * 50.0 / 70.0));
  }
  double lr_at_epoch(int epoch_1based) const {
    return epoch_1based > decay_epoch() ? lr * 0.1 : lr;
  }

  void validate() const {
    if (lr <= 0) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (width % 16 != 0 || height % 16 != 0)
      throw std::invalid_argument("TrainConfig: dims must be multiples of 16");
  }
};

inline void apply_config_kv(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "data") cfg.data_dir = v;
    else if (k == "out") cfg.out_checkpoint = v;
    else if (k == "log") cfg.log_csv = v;
    else if (k == "lr") cfg.lr = std::stod(v);
    else if (k == "epochs") cfg.epochs = std::stoi(v);
    else if (k == "batch") cfg.batch = std::stoi(v);
    else if (k == "seed") cfg.seed = std::stoull(v);
    else if (k == "variant") cfg.variant = v;
    else if (k == "alpha") cfg.alpha = std::stod(v);
    else if (k == "lambda") {
      std::istringstream ss(v);
      std::string tok;
      for (auto& l : cfg.lambda) {
        if (!std::getline(ss, tok, ','))
          throw std::invalid_argument("config: lambda wants 4 comma-separated values");
        l = std::stod(tok);
      }
    } else if (k == "width") cfg.width = std::stoi(v);
    else if (k == "height") cfg.height = std::stoi(v);
    else if (k == "stem_channels") cfg.stem_channels = std::stoi(v);
    else if (k == "channels") {
      std::istringstream ss(v);
      std::string tok;
      for (auto& c : cfg.channels) {
        if (!std::getline(ss, tok, ','))
          throw std::invalid_argument("config: channels wants 3 comma-separated values");
        c = std::stoi(tok);
      }
    } else if (k == "extractor_seed") cfg.extractor_seed = std::stoull(v);
    else if (k == "save_every") cfg.save_every = std::stoi(v);
    else if (k == "augment") cfg.augment = (v == "1" || v == "true");
    else if (k == "deterministic") cfg.deterministic = (v == "1" || v == "true");
    else throw std::invalid_argument("config: unknown key '" + k + "'");
  }
}

inline TrainConfig load_train_config(const std::string& path) {
  TrainConfig cfg;
  apply_config_kv(cfg, parse_kv_file(path));
  return cfg;
}

inline ModelConfig model_config_from_train(const TrainConfig& cfg) {
  ModelConfig mc;
  mc.width = cfg.width;
  mc.height = cfg.height;
  mc.encoder.stem_channels = cfg.stem_channels;
  mc.encoder.channels = cfg.channels;
  mc.variant = variant_from_name(cfg.variant);
  mc.extractor_seed = cfg.extractor_seed;
  return mc;
}

// Key=value echo of the resolved model configuration; embedded in checkpoints
// so inference can rebuild the exact architecture.
inline std::string model_config_to_text(const ModelConfig& mc) {
  std::ostringstream os;
  os << "width = " << mc.width << "\n";
  os << "height = " << mc.height << "\n";
  os << "stem_channels = " << mc.encoder.stem_channels << "\n";
  os << "channels = " << mc.encoder.channels[0] << "," << mc.encoder.channels[1] << ","
     << mc.encoder.channels[2] << "\n";
  os << "extractor_seed = " << mc.extractor_seed << "\n";
  os << "variant = " << mc.variant.name << "\n";
  os << "attention = ";
  for (auto a : mc.variant.attention) os << (a == AttentionKind::kRda ? 'R' : 'T');
  os << "\n";
  os << "value_dilated = " << (mc.variant.value_dilated ? 1 : 0) << "\n";
  os << "rows = " << mc.variant.rows << "\n";
  os << "stride = " << mc.variant.stride << "\n";
  os << "mono = " << (mc.variant.mono ? 1 : 0) << "\n";
  os << "disparity_concat = " << (mc.variant.disparity_concat ? 1 : 0) << "\n";
  if (mc.variant.alpha_override)
    os << "alpha_override = " << *mc.variant.alpha_override << "\n";
  return os.str();
}

inline ModelConfig model_config_from_text(const std::string& text) {
  std::istringstream is(text);
  auto kv = parse_kv_text(is);
  auto need = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw FormatError("model config echo missing key '" + k + "'");
    return it->second;
  };
  ModelConfig mc;
  mc.width = std::stoi(need("width"));
  mc.height = std::stoi(need("height"));
  mc.encoder.stem_channels = std::stoi(need("stem_channels"));
  {
    std::istringstream ss(need("channels"));
    std::string tok;
    for (auto& c : mc.encoder.channels) {
      std::getline(ss, tok, ',');
      c = std::stoi(tok);
    }
  }
  mc.extractor_seed = std::stoull(need("extractor_seed"));
  mc.variant.name = need("variant");
  const std::string att = need("attention");
  for (int i = 0; i < 3; ++i)
    mc.variant.attention[static_cast<size_t>(i)] =
        att[static_cast<size_t>(i)] == 'R' ? AttentionKind::kRda : AttentionKind::kTypical;
  mc.variant.value_dilated = need("value_dilated") == "1";
  mc.variant.rows = std::stoi(need("rows"));
  mc.variant.stride = std::stoi(need("stride"));
  mc.variant.mono = need("mono") == "1";
  mc.variant.disparity_concat = need("disparity_concat") == "1";
  if (kv.count("alpha_override")) mc.variant.alpha_override = std::stod(kv["alpha_override"]);
  return mc;
}

}  // namespace swd
