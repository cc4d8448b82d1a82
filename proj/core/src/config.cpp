// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "onegan/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "onegan/errors.hpp"

namespace onegan {

namespace {

constexpr std::array<std::string_view, 8> kAblations = {
    "none",        "no-mixup",       "full-mixup",   "no-bypass",
    "no-mask-reg", "phase-I-only",   "no-multi-phase", "no-real-recon"};

std::string to_text(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string to_text(int64_t v) { return std::to_string(v); }
std::string to_text(uint64_t v) { return std::to_string(v); }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(const std::string& v) { return v; }
std::string to_text(GanLoss v) { return v == GanLoss::bce ? "bce" : "hinge"; }

void from_text(const std::string& s, double& out) {
  std::size_t used = 0;
  out = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
}

void from_text(const std::string& s, int64_t& out) {
  std::size_t used = 0;
  out = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
}

void from_text(const std::string& s, uint64_t& out) {
  std::size_t used = 0;
  out = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
}

void from_text(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
  } else if (s == "false" || s == "0" || s == "no") {
    out = false;
  } else {
    throw std::invalid_argument(s);
  }
}

void from_text(const std::string& s, std::string& out) { out = s; }

void from_text(const std::string& s, GanLoss& out) {
  if (s == "bce") {
    out = GanLoss::bce;
  } else if (s == "hinge") {
    out = GanLoss::hinge;
  } else {
    throw std::invalid_argument(s);
  }
}

struct Binding {
  std::string section;
  std::string key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

template <typename Member>
Binding bind(std::string section, std::string key, Member member) {
  return Binding{
      std::move(section), std::move(key),
      [member](const Config& c) { return to_text(std::invoke(member, c)); },
      [member](Config& c, const std::string& s) { from_text(s, std::invoke(member, c)); }};
}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    auto hp = [](auto field) { return [field](auto& c) -> auto& { return c.hp.*field; }; };
    auto lw = [](auto field) { return [field](auto& c) -> auto& { return c.weights.*field; }; };
    auto mx = [](auto field) { return [field](auto& c) -> auto& { return c.mixup.*field; }; };
    auto tr = [](auto field) { return [field](auto& c) -> auto& { return c.train.*field; }; };

    b.push_back(bind("model", "n_child", hp(&HyperParams::n_child)));
    b.push_back(bind("model", "n_parent", hp(&HyperParams::n_parent)));
    b.push_back(bind("model", "d_z", hp(&HyperParams::d_z)));
    b.push_back(bind("model", "d_c", hp(&HyperParams::d_c)));
    b.push_back(bind("model", "d_p", hp(&HyperParams::d_p)));
    b.push_back(bind("model", "d_bg", hp(&HyperParams::d_bg)));
    b.push_back(bind("model", "image_size", hp(&HyperParams::image_size)));
    b.push_back(bind("model", "channel_scale", hp(&HyperParams::channel_scale)));

    b.push_back(bind("train", "batch_size", hp(&HyperParams::batch_size)));
    b.push_back(bind("train", "lr", hp(&HyperParams::lr)));
    b.push_back(bind("train", "total_iters", hp(&HyperParams::total_iters)));
    b.push_back(bind("train", "phase1_iters", hp(&HyperParams::phase1_iters)));
    b.push_back(bind("train", "real_recon_delay", hp(&HyperParams::real_recon_delay)));
    b.push_back(bind("train", "encoder_warmup_iters", hp(&HyperParams::encoder_warmup_iters)));
    b.push_back(bind("train", "seed", tr(&TrainOptions::seed)));
    b.push_back(bind("train", "checkpoint_every", tr(&TrainOptions::checkpoint_every)));
    b.push_back(bind("train", "sample_every", tr(&TrainOptions::sample_every)));
    b.push_back(bind("train", "log_every", tr(&TrainOptions::log_every)));
    b.push_back(bind("train", "hflip", tr(&TrainOptions::hflip)));
    b.push_back(bind("train", "gan_loss", tr(&TrainOptions::gan_loss)));
    b.push_back(bind("train", "mse_grad_to_generators", tr(&TrainOptions::mse_grad_to_generators)));
    b.push_back(bind("train", "independent_parent", tr(&TrainOptions::independent_parent)));
    b.push_back(bind("train", "phase2_enabled", tr(&TrainOptions::phase2_enabled)));
    b.push_back(bind("train", "real_recon_enabled", tr(&TrainOptions::real_recon_enabled)));
    b.push_back(bind("train", "ablation", tr(&TrainOptions::ablation)));

    b.push_back(bind("loss", "w_bg_adv", lw(&LossWeights::w_bg_adv)));
    b.push_back(bind("loss", "w_regv", lw(&LossWeights::w_regv)));
    b.push_back(bind("loss", "w_mask", lw(&LossWeights::w_mask)));
    b.push_back(bind("loss", "w_mask_d", lw(&LossWeights::w_mask_d)));
    b.push_back(bind("loss", "w_class", lw(&LossWeights::w_class)));
    b.push_back(bind("loss", "w_mse", lw(&LossWeights::w_mse)));
    b.push_back(bind("loss", "w_adv", lw(&LossWeights::w_adv)));
    b.push_back(bind("loss", "w_vae", lw(&LossWeights::w_vae)));
    b.push_back(bind("loss", "w_rec", lw(&LossWeights::w_rec)));
    b.push_back(bind("loss", "w_per", lw(&LossWeights::w_per)));

    b.push_back(bind("mixup", "beta0_lo", mx(&MixupConfig::beta0_lo)));
    b.push_back(bind("mixup", "beta0_hi", mx(&MixupConfig::beta0_hi)));
    b.push_back(bind("mixup", "beta1_lo", mx(&MixupConfig::beta1_lo)));
    b.push_back(bind("mixup", "beta1_hi", mx(&MixupConfig::beta1_hi)));
    b.push_back(bind("mixup", "bypass", mx(&MixupConfig::bypass)));
    b.push_back(bind("mixup", "segment_pure_encoder", mx(&MixupConfig::segment_pure_encoder)));

    b.push_back(bind("data", "root", tr(&TrainOptions::data_root)));
    return b;
  }();
  return table;
}

} // namespace

void HyperParams::validate() const {
  if (n_child <= 0 || n_parent <= 0) throw ValidationError("class counts must be positive");
  if (n_parent >= n_child) throw ValidationError("n_parent must be smaller than n_child");
  if (d_z <= 0 || d_c <= 0 || d_p <= 0 || d_bg <= 0) {
    throw ValidationError("code dimensionalities must be positive");
  }
  if (image_size != 64 && image_size != 128) {
    throw ValidationError("image_size must be 64 or 128");
  }
  if (!(channel_scale > 0.0)) throw ValidationError("channel_scale must be positive");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (!(lr > 0.0)) throw ValidationError("lr must be positive");
  if (phase1_iters < 0 || real_recon_delay < 0 || encoder_warmup_iters < 0) {
    throw ValidationError("schedule lengths must be non-negative");
  }
  if (phase1_iters >= total_iters) {
    throw ValidationError("phase1_iters must be smaller than total_iters");
  }
}

int64_t HyperParams::width(int64_t table_channels) const {
  return std::max<int64_t>(1, std::llround(static_cast<double>(table_channels) * channel_scale));
}

void LossWeights::validate() const {
  for (double w : {w_bg_adv, w_regv, w_mask, w_mask_d, w_class, w_mse, w_adv, w_vae, w_rec, w_per}) {
    if (!(w >= 0.0)) throw ValidationError("loss weights must be non-negative");
  }
}

void MixupConfig::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(beta0_lo) || !in_unit(beta0_hi) || beta0_lo > beta0_hi) {
    throw ValidationError("beta0 range must lie in [0,1]");
  }
  if (!in_unit(beta1_lo) || !in_unit(beta1_hi) || beta1_lo > beta1_hi) {
    throw ValidationError("beta1 range must lie in [0,1]");
  }
}

void Config::validate() const {
  hp.validate();
  weights.validate();
  mixup.validate();
  if (!is_known_ablation(train.ablation)) {
    throw ValidationError("unknown ablation tag: " + train.ablation);
  }
}

Config parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }

  Config config;
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) {
      throw ConfigError("config key outside of a section: " + section);
    }
    for (const auto& [key, value] : entries) {
      const auto& table = bindings();
      auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) {
        return b.section == section && b.key == key;
      });
      if (it == table.end()) throw ConfigError("unknown config key: " + section + "." + key);
      try {
        it->set(config, value.data());
      } catch (const std::exception&) {
        throw ConfigError("bad value for " + section + "." + key + ": '" + value.data() + "'");
      }
    }
  }
  config.validate();
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string format_config(const Config& config) {
  std::ostringstream os;
  std::string current;
  for (const auto& b : bindings()) {
    if (b.section != current) {
      if (!current.empty()) os << '\n';
      os << '[' << b.section << "]\n";
      current = b.section;
    }
    os << b.key << " = " << b.get(config) << '\n';
  }
  return os.str();
}

void save_config(const Config& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path.string());
  out << format_config(config);
}

bool is_known_ablation(std::string_view tag) {
  return std::find(kAblations.begin(), kAblations.end(), tag) != kAblations.end();
}

void apply_ablation(Config& config, std::string_view tag) {
  if (!is_known_ablation(tag)) throw ValidationError("unknown ablation tag: " + std::string(tag));
  config.train.ablation = std::string(tag);
  if (tag == "no-mixup") {
    config.mixup.beta0_lo = config.mixup.beta0_hi = 1.0;
    config.mixup.beta1_lo = config.mixup.beta1_hi = 1.0;
  } else if (tag == "full-mixup") {
    config.mixup.beta0_lo = 0.0;
    config.mixup.beta0_hi = 1.0;
    config.mixup.beta1_lo = 0.0;
    config.mixup.beta1_hi = 1.0;
  } else if (tag == "no-bypass") {
    config.mixup.bypass = false;
  } else if (tag == "no-mask-reg") {
    config.weights.w_mask = 0.0;
  } else if (tag == "phase-I-only") {
    config.train.phase2_enabled = false;
  } else if (tag == "no-multi-phase") {
    config.hp.phase1_iters = 0;
    config.hp.real_recon_delay = 0;
    config.hp.encoder_warmup_iters = 0;
  } else if (tag == "no-real-recon") {
    config.train.real_recon_enabled = false;
  }
}

std::string config_digest(const Config& config) {
  // FNV-1a, stable across platforms.
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : format_config(config)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

} // namespace onegan
