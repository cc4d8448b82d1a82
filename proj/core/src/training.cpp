// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "onegan/training.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "onegan/errors.hpp"
#include "onegan/priors.hpp"

namespace fs = std::filesystem;
namespace F = torch::nn::functional;
using json = nlohmann::json;

namespace onegan {

namespace {

constexpr std::array<PathTag, 3> kPaths = {PathTag::generation, PathTag::fake_recon,
                                           PathTag::real_recon};

const HyperParams& seeded(const Config& config) {
  torch::manual_seed(config.train.seed);
  return config.hp;
}

std::unique_ptr<torch::optim::Adam> adam(const std::vector<torch::Tensor>& params, double lr) {
  return std::make_unique<torch::optim::Adam>(params, torch::optim::AdamOptions(lr));
}

void copy_parameters(const torch::nn::Module& src, torch::nn::Module& dst) {
  torch::NoGradGuard guard;
  auto s = src.named_parameters();
  auto d = dst.named_parameters();
  for (const auto& item : s) d[item.key()].copy_(item.value());
  auto sb = src.named_buffers();
  auto db = dst.named_buffers();
  for (const auto& item : sb) db[item.key()].copy_(item.value());
}

bool has_gradient(const torch::nn::Module& m) {
  for (const auto& p : m.parameters()) {
    if (p.grad().defined() && p.grad().abs().sum().item<double>() > 0) return true;
  }
  return false;
}

std::string blob_name(const std::string& param) {
  std::string out = param;
  std::replace(out.begin(), out.end(), '/', '_');
  return out + ".bin";
}

json shapes_of(const torch::nn::Module& m) {
  json out = json::object();
  for (const auto& item : m.named_parameters()) {
    out[item.key()] = {{"shape", item.value().sizes().vec()},
                       {"dtype", std::string(c10::toString(item.value().scalar_type()))},
                       {"file", blob_name(item.key())}};
  }
  return out;
}

void check_shapes(const json& stored, const torch::nn::Module& m, const std::string& name) {
  auto params = m.named_parameters();
  if (stored.size() != params.size()) {
    throw ShapeError("checkpoint module " + name + ": parameter count mismatch");
  }
  for (const auto& item : params) {
    if (!stored.contains(item.key())) {
      throw ShapeError("checkpoint module " + name + ": missing parameter " + item.key());
    }
    const auto& entry = stored[item.key()];
    if (entry["shape"].get<std::vector<int64_t>>() != item.value().sizes().vec()) {
      throw ShapeError("checkpoint module " + name + ": shape mismatch for " + item.key());
    }
    if (entry["dtype"].get<std::string>() != c10::toString(item.value().scalar_type())) {
      throw ShapeError("checkpoint module " + name + ": dtype mismatch for " + item.key());
    }
  }
}

json phase_json(const PhaseState& s) {
  return {{"iteration", s.iteration},
          {"phase", s.phase},
          {"fake_recon_active", s.fake_recon_active},
          {"real_recon_active", s.real_recon_active},
          {"generators_frozen", s.generators_frozen}};
}

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw StateError("cannot open checkpoint manifest: " + file.string());
  return json::parse(in);
}

// Raw little-endian element bytes, one file per parameter.
void save_module(const std::shared_ptr<torch::nn::Module>& m, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& item : m->named_parameters()) {
    auto t = item.value().detach().contiguous();
    std::ofstream out(dir / blob_name(item.key()), std::ios::binary);
    out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
    if (!out) throw StateError("cannot write checkpoint blob for " + item.key());
  }
}

void load_module(const std::shared_ptr<torch::nn::Module>& m, const fs::path& dir) {
  torch::NoGradGuard guard;
  for (auto& item : m->named_parameters()) {
    const auto file = dir / blob_name(item.key());
    auto& param = item.value();
    if (!fs::exists(file) || fs::file_size(file) != param.nbytes()) {
      throw StateError("checkpoint blob missing or truncated: " + file.string());
    }
    auto buffer = torch::empty_like(param, torch::MemoryFormat::Contiguous);
    std::ifstream in(file, std::ios::binary);
    in.read(static_cast<char*>(buffer.data_ptr()), static_cast<std::streamsize>(buffer.nbytes()));
    param.copy_(buffer);
  }
}

// Per-path bookkeeping inside one training step.
struct PathRun {
  PathTag tag;
  PathOutput out;
  ImageQuad target;
  std::optional<PriorBundle> labels;
  std::optional<PathOutput> source;
  torch::Tensor d_loss;
};

} // namespace

// ---------------------------------------------------------------------------

PhaseState phase_schedule(int64_t iteration, const HyperParams& hp, bool phase2_enabled,
                          bool real_recon_enabled) {
  if (iteration < 0) throw ValidationError("phase_schedule: negative iteration");
  PhaseState s;
  s.iteration = iteration;
  if (!phase2_enabled || iteration < hp.phase1_iters) return s;
  s.phase = 2;
  s.fake_recon_active = true;
  s.real_recon_active = real_recon_enabled && iteration >= hp.phase1_iters + hp.real_recon_delay;
  s.generators_frozen = iteration < hp.phase1_iters + hp.encoder_warmup_iters;
  return s;
}

// ---------------------------------------------------------------------------

DiscriminatorBank::DiscriminatorBank(const HyperParams& hp) : hp_(hp) {
  image_.emplace(PathTag::generation, ImageDiscriminator(hp));
  background_.emplace(PathTag::generation, BackgroundDiscriminator(hp));
}

void DiscriminatorBank::clone() {
  if (cloned_) throw StateError("discriminator bank already cloned");
  const auto& src_img = image_.at(PathTag::generation);
  const auto& src_bg = background_.at(PathTag::generation);
  const auto dtype = src_img->parameters().front().scalar_type();
  for (auto tag : {PathTag::fake_recon, PathTag::real_recon}) {
    ImageDiscriminator img(hp_);
    BackgroundDiscriminator bg(hp_);
    img->to(dtype);
    bg->to(dtype);
    copy_parameters(*src_img, *img);
    copy_parameters(*src_bg, *bg);
    img->train(src_img->is_training());
    bg->train(src_bg->is_training());
    image_.emplace(tag, img);
    background_.emplace(tag, bg);
  }
  cloned_ = true;
}

ImageDiscriminator& DiscriminatorBank::image(PathTag tag) {
  auto it = image_.find(tag);
  if (it == image_.end()) {
    throw StateError("no image discriminator for path " + std::string(to_string(tag)));
  }
  return it->second;
}

BackgroundDiscriminator& DiscriminatorBank::background(PathTag tag) {
  auto it = background_.find(tag);
  if (it == background_.end()) {
    throw StateError("no background discriminator for path " + std::string(to_string(tag)));
  }
  return it->second;
}

int64_t DiscriminatorBank::image_count() const { return static_cast<int64_t>(image_.size()); }
int64_t DiscriminatorBank::background_count() const {
  return static_cast<int64_t>(background_.size());
}

std::vector<PathTag> DiscriminatorBank::paths() const {
  std::vector<PathTag> out;
  for (auto tag : kPaths) {
    if (image_.count(tag)) out.push_back(tag);
  }
  return out;
}

std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> DiscriminatorBank::modules()
    const {
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> out;
  for (auto tag : paths()) {
    out.emplace_back("d_c." + std::string(to_string(tag)), image_.at(tag).ptr());
    out.emplace_back("d_bg." + std::string(to_string(tag)), background_.at(tag).ptr());
  }
  return out;
}

void DiscriminatorBank::set_requires_grad(bool on) {
  for (auto& [name, m] : modules()) {
    for (auto& p : m->parameters()) p.requires_grad_(on);
  }
}

void DiscriminatorBank::to(torch::Dtype dtype) {
  for (auto& [name, m] : modules()) m->to(dtype);
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, torch::optim::Adam*>> OptimizerSet::all() const {
  std::vector<std::pair<std::string, torch::optim::Adam*>> out;
  out.emplace_back("generators", generators.get());
  out.emplace_back("encoders", encoders.get());
  for (auto tag : kPaths) {
    if (auto it = d_image.find(tag); it != d_image.end()) {
      out.emplace_back("d_c." + std::string(to_string(tag)), it->second.get());
    }
    if (auto it = d_background.find(tag); it != d_background.end()) {
      out.emplace_back("d_bg." + std::string(to_string(tag)), it->second.get());
    }
  }
  return out;
}

OptimizerSet make_optimizers(GeneratorSet& nets, DiscriminatorBank& bank, const HyperParams& hp) {
  OptimizerSet set;
  set.generators = adam(nets.generator_parameters(), hp.lr);
  set.encoders = adam(nets.encoder_parameters(), hp.lr);
  add_clone_optimizers(set, bank, hp);
  return set;
}

void add_clone_optimizers(OptimizerSet& optimizers, DiscriminatorBank& bank, const HyperParams& hp) {
  for (auto tag : bank.paths()) {
    if (!optimizers.d_image.count(tag)) {
      optimizers.d_image[tag] = adam(bank.image(tag)->parameters(), hp.lr);
    }
    if (!optimizers.d_background.count(tag)) {
      optimizers.d_background[tag] = adam(bank.background(tag)->parameters(), hp.lr);
    }
  }
}

// ---------------------------------------------------------------------------

Trainer::Trainer(Config config, torch::Tensor objects, torch::Tensor backgrounds)
    : config_(std::move(config)),
      nets_(seeded(config_)),
      bank_(config_.hp),
      optimizers_(make_optimizers(nets_, bank_, config_.hp)),
      rng_(make_generator(config_.train.seed)) {
  config_.validate();
  if (objects.defined()) {
    batches_.emplace(std::move(objects), std::move(backgrounds), config_.hp.batch_size,
                     config_.train.seed, config_.train.hflip);
  }
}

PhaseState Trainer::state() const {
  return phase_schedule(iteration_, config_.hp, config_.train.phase2_enabled,
                        config_.train.real_recon_enabled);
}

void Trainer::enter_phase_two() {
  bank_.clone();
  add_clone_optimizers(optimizers_, bank_, config_.hp);
}

std::vector<LossReport> Trainer::train_iteration() {
  if (!batches_) throw ConfigError("trainer has no dataset attached");
  auto [objects, backgrounds] = batches_->next();
  return training_step(objects, backgrounds);
}

std::vector<LossReport> Trainer::training_step(const torch::Tensor& objects,
                                               const torch::Tensor& backgrounds) {
  if (!backgrounds.defined() || backgrounds.numel() == 0) {
    throw ConfigError("training_step: background image set missing");
  }
  if (!objects.defined() || objects.numel() == 0) {
    throw ValidationError("training_step: empty object batch");
  }
  const auto st = state();
  if (st.phase == 2 && !bank_.cloned()) enter_phase_two();

  const auto& hp = config_.hp;
  const auto& w = config_.weights;
  const auto kind = config_.train.gan_loss;
  const auto batch = objects.size(0);
  const auto dtype = nets_.lut->v_c->weight.scalar_type();
  const auto real_objects = objects.to(dtype);
  const auto real_backgrounds = backgrounds.to(dtype);
  nets_.train();

  // Forward passes of every active path.
  std::vector<PathRun> runs;
  {
    auto priors = sample_priors(hp, batch, rng_, config_.train.independent_parent);
    PathRun run{PathTag::generation, generation_path(priors, nets_), {}, priors, std::nullopt, {}};
    runs.push_back(std::move(run));
  }
  AutoencodeOptions ae_options;
  ae_options.bypass = config_.mixup.bypass;
  if (st.fake_recon_active) {
    auto priors = sample_priors(hp, batch, rng_, config_.train.independent_parent);
    PathOutput source;
    {
      torch::NoGradGuard guard;
      source = generation_path(priors, nets_);
    }
    auto mix = sample_mixup(config_.mixup, batch, rng_);
    auto out = autoencode_path(source.quad.image, nets_, mix, rng_, ae_options);
    runs.push_back({PathTag::fake_recon, std::move(out), source.quad, priors, source, {}});
  }
  if (st.real_recon_active) {
    auto mix = sample_mixup(config_.mixup, batch, rng_);
    auto out = autoencode_path(real_objects, nets_, mix, rng_, ae_options);
    ImageQuad target;
    target.image = real_objects;
    runs.push_back({PathTag::real_recon, std::move(out), target, std::nullopt, std::nullopt, {}});
  }

  // Discriminator updates, one clone pair per path.
  bank_.set_requires_grad(true);
  flow_.clear();
  for (auto& run : runs) {
    for (auto& [name, m] : bank_.modules()) m->zero_grad(true);
    auto& dc = bank_.image(run.tag);
    auto& dbg = bank_.background(run.tag);
    auto bg_real = dbg->forward(real_backgrounds);
    auto bg_obj = dbg->forward(real_objects);
    auto bg_fake = dbg->forward(run.out.quad.bg.detach());
    auto img_real = dc->forward(real_objects);
    auto img_fake = dc->forward(run.out.quad.image.detach());
    DiscriminatorLogits logits{bg_real.real_fake, bg_fake.real_fake,       bg_real.background,
                               bg_obj.background, img_real.real_fake, img_fake.real_fake};
    auto loss = adversarial_d_loss(logits, w, kind).total;
    if (run.labels) loss = loss + w.w_class * F::cross_entropy(img_fake.class_logits, run.labels->child);
    loss.backward();
    for (auto& [name, m] : bank_.modules()) {
      if (has_gradient(*m)) flow_[run.tag].insert(name);
    }
    optimizers_.d_image.at(run.tag)->step();
    optimizers_.d_background.at(run.tag)->step();
    run.d_loss = loss.detach();
  }
  for (auto& [name, m] : bank_.modules()) m->zero_grad(true);

  // Generator and encoder update on the sum of all path objectives.
  bank_.set_requires_grad(false);
  const bool frozen = st.generators_frozen;
  if (frozen) {
    for (auto& p : nets_.generator_parameters()) p.requires_grad_(false);
  }
  auto gen_side = [&](const torch::Tensor& t) {
    return config_.train.mse_grad_to_generators ? t : t.detach();
  };
  std::vector<LossReport> reports;
  torch::Tensor objective = torch::zeros({}, real_objects.options());
  for (auto& run : runs) {
    auto& dc = bank_.image(run.tag);
    auto& dbg = bank_.background(run.tag);
    const auto& q = run.out.quad;
    auto img_d = dc->forward(q.image);
    auto bg_d = dbg->forward(q.bg);
    LossTerms terms;
    terms["L_REG_v"] = code_regularization(run.out.lut.v_p, run.out.lut.v_c, run.out.lut.v_bg);
    terms["L_G"] = adversarial_g_loss(bg_d.real_fake, bg_d.background, img_d.real_fake, w, kind).total;
    terms["L_M"] = mask_regularization(q.mask, w.w_mask_d).total;

    if (run.tag == PathTag::generation) {
      auto content = nets_.e_p->forward(q.image);
      auto style = nets_.e_c->forward(q.image);
      auto bypass_bg = nets_.e_bg->forward(q.image, q.mask);
      terms["L_E"] = classification_loss(img_d.class_logits, content.logits_p, style.logits_c,
                                         run.labels->parent, run.labels->child, run.tag);
      terms["L_MSE"] = distance_loss(gen_side(run.out.used.v_c), style.mu_c,
                                     gen_side(run.out.used.v_p), content.mu_p,
                                     gen_side(run.out.pre_fg), content.bypass_fg,
                                     gen_side(run.out.pre_bg), bypass_bg);
    } else {
      const auto& post = *run.out.posterior;
      if (run.tag == PathTag::fake_recon) {
        const auto& src = *run.source;
        terms["L_E"] = classification_loss(img_d.class_logits, post.logits_p, post.logits_c,
                                           run.labels->parent, run.labels->child, run.tag);
        terms["L_MSE"] = distance_loss(src.used.v_c, post.mu_c, src.used.v_p, post.mu_p,
                                       src.pre_fg, post.bypass_fg, src.pre_bg, post.bypass_bg);
        terms["L_VAE"] = vae_kl_loss(post, src.used.v_p, src.used.v_c).total;
        terms["L_PER"] = perceptual_loss(run.target, q, dc, &dbg, run.tag);
      } else {
        terms["L_E"] = torch::zeros({}, real_objects.options());
        terms["L_MSE"] = torch::zeros({}, real_objects.options());
        terms["L_VAE"] = vae_kl_loss(post, run.out.lut.v_p, run.out.lut.v_c).total;
        terms["L_PER"] = perceptual_loss(run.target, q, dc, nullptr, run.tag);
      }
      terms["L_REC"] = reconstruction_loss(run.target, q, run.tag);
    }
    auto totals = total_losses(terms, w, run.tag);
    objective = objective + (run.tag == PathTag::generation ? totals.gen : totals.ae);
    totals.d = run.d_loss;
    reports.push_back(make_report(terms, totals, run.tag, iteration_));
  }

  optimizers_.generators->zero_grad(true);
  optimizers_.encoders->zero_grad(true);
  objective.backward();
  optimizers_.encoders->step();
  if (frozen) {
    for (auto& p : nets_.generator_parameters()) p.requires_grad_(true);
  } else {
    optimizers_.generators->step();
  }
  bank_.set_requires_grad(true);
  ++iteration_;
  return reports;
}

std::vector<std::pair<std::string, torch::Tensor>> Trainer::named_state() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  auto add = [&](const std::string& prefix, const std::shared_ptr<torch::nn::Module>& m) {
    for (const auto& item : m->named_parameters()) out.emplace_back(prefix + "." + item.key(), item.value());
  };
  for (const auto& [name, m] : nets_.generator_modules()) add(name, m);
  for (const auto& [name, m] : nets_.encoder_modules()) add(name, m);
  for (const auto& [name, m] : bank_.modules()) add(name, m);
  return out;
}

// ---------------------------------------------------------------------------

void Trainer::save_checkpoint(const fs::path& dir) const {
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp / "modules");
  fs::create_directories(tmp / "optim");

  json manifest;
  manifest["format"] = "onegan-checkpoint-1";
  manifest["iteration"] = iteration_;
  manifest["phase_state"] = phase_json(state());
  manifest["bank_cloned"] = bank_.cloned();
  manifest["config"] = format_config(config_);
  manifest["config_digest"] = config_digest(config_);
  if (batches_) {
    const auto it = batches_->state();
    manifest["data_stream"] = {{"epoch", it.epoch},
                               {"cursor", it.cursor},
                               {"bg_epoch", it.bg_epoch},
                               {"bg_cursor", it.bg_cursor}};
  }
  json modules = json::object();
  auto put = [&](const std::string& name, const std::shared_ptr<torch::nn::Module>& m) {
    save_module(m, tmp / "modules" / name);
    modules[name] = shapes_of(*m);
  };
  for (const auto& [name, m] : nets_.generator_modules()) put(name, m);
  for (const auto& [name, m] : nets_.encoder_modules()) put(name, m);
  for (const auto& [name, m] : bank_.modules()) put(name, m);
  manifest["modules"] = modules;

  json optim = json::array();
  for (const auto& [name, opt] : optimizers_.all()) {
    torch::save(*opt, (tmp / "optim" / (name + ".pt")).string());
    optim.push_back(name);
  }
  manifest["optimizers"] = optim;
  torch::save(rng_.get_state(), (tmp / "rng.pt").string());

  std::ofstream(tmp / "manifest.json") << manifest.dump(2) << '\n';
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

void Trainer::load_checkpoint(const fs::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  const auto stored = parse_config(manifest.at("config").get<std::string>());
  if (format_config(stored) != format_config(config_)) {
    throw ConfigError("checkpoint configuration differs from the run configuration");
  }
  if (manifest.at("bank_cloned").get<bool>() && !bank_.cloned()) enter_phase_two();

  const auto& modules = manifest.at("modules");
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> all;
  for (const auto& item : nets_.generator_modules()) all.push_back(item);
  for (const auto& item : nets_.encoder_modules()) all.push_back(item);
  for (const auto& item : bank_.modules()) all.push_back(item);
  if (modules.size() != all.size()) throw StateError("checkpoint module set differs from the model");
  for (const auto& [name, m] : all) {
    if (!modules.contains(name)) throw StateError("checkpoint lacks module " + name);
    check_shapes(modules.at(name), *m, name);
  }
  for (const auto& [name, m] : all) load_module(m, dir / "modules" / name);
  for (const auto& [name, opt] : optimizers_.all()) {
    torch::load(*opt, (dir / "optim" / (name + ".pt")).string());
  }
  torch::Tensor rng_state;
  torch::load(rng_state, (dir / "rng.pt").string());
  rng_.set_state(rng_state);
  iteration_ = manifest.at("iteration").get<int64_t>();
  if (batches_ && manifest.contains("data_stream")) {
    const auto& ds = manifest["data_stream"];
    batches_->set_state({ds.at("epoch").get<int64_t>(), ds.at("cursor").get<int64_t>(),
                         ds.at("bg_epoch").get<int64_t>(), ds.at("bg_cursor").get<int64_t>()});
  }
}

CheckpointInfo read_checkpoint_info(const fs::path& dir) {
  const auto manifest = read_json(dir / "manifest.json");
  CheckpointInfo info;
  info.config = parse_config(manifest.at("config").get<std::string>());
  info.iteration = manifest.at("iteration").get<int64_t>();
  const auto& ps = manifest.at("phase_state");
  info.state.iteration = ps.at("iteration").get<int64_t>();
  info.state.phase = ps.at("phase").get<int>();
  info.state.fake_recon_active = ps.at("fake_recon_active").get<bool>();
  info.state.real_recon_active = ps.at("real_recon_active").get<bool>();
  info.state.generators_frozen = ps.at("generators_frozen").get<bool>();
  info.bank_cloned = manifest.at("bank_cloned").get<bool>();
  return info;
}

std::unique_ptr<GeneratorSet> load_generator_set(const fs::path& dir, CheckpointInfo* info) {
  auto meta = read_checkpoint_info(dir);
  const auto manifest = read_json(dir / "manifest.json");
  auto nets = std::make_unique<GeneratorSet>(meta.config.hp);
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> all;
  for (const auto& item : nets->generator_modules()) all.push_back(item);
  for (const auto& item : nets->encoder_modules()) all.push_back(item);
  for (const auto& [name, m] : all) {
    check_shapes(manifest.at("modules").at(name), *m, name);
    load_module(m, dir / "modules" / name);
  }
  if (info) *info = meta;
  return nets;
}

} // namespace onegan
