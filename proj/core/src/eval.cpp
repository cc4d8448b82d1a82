// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "onegan/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <opencv2/core.hpp>

#include "onegan/errors.hpp"
#include "onegan/paths.hpp"
#include "onegan/priors.hpp"

namespace F = torch::nn::functional;

namespace onegan {

namespace {

struct Contingency {
  std::vector<int64_t> row, col;       // marginals
  std::map<std::pair<int64_t, int64_t>, int64_t> cells;
  int64_t n = 0;
};

Contingency contingency(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  if (a.size() != b.size()) throw ValidationError("labelings differ in length");
  if (a.size() < 2) throw ValidationError("labelings need at least two elements");
  std::map<int64_t, int64_t> ia, ib;
  for (auto v : a) ia.emplace(v, static_cast<int64_t>(ia.size()));
  for (auto v : b) ib.emplace(v, static_cast<int64_t>(ib.size()));
  Contingency t;
  t.row.assign(ia.size(), 0);
  t.col.assign(ib.size(), 0);
  t.n = static_cast<int64_t>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto r = ia[a[i]], c = ib[b[i]];
    ++t.row[static_cast<std::size_t>(r)];
    ++t.col[static_cast<std::size_t>(c)];
    ++t.cells[{r, c}];
  }
  return t;
}

double entropy_of(const std::vector<int64_t>& counts, int64_t n) {
  double h = 0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

double mi_of(const Contingency& t) {
  double mi = 0;
  const double n = static_cast<double>(t.n);
  for (const auto& [rc, nij] : t.cells) {
    const double a = static_cast<double>(t.row[static_cast<std::size_t>(rc.first)]);
    const double b = static_cast<double>(t.col[static_cast<std::size_t>(rc.second)]);
    mi += nij / n * std::log(n * nij / (a * b));
  }
  return std::max(mi, 0.0);
}

double expected_mi(const Contingency& t) {
  const double n = static_cast<double>(t.n);
  const double lg_n = std::lgamma(n + 1);
  double emi = 0;
  for (auto ai : t.row) {
    for (auto bj : t.col) {
      const double a = static_cast<double>(ai), b = static_cast<double>(bj);
      const int64_t lo = std::max<int64_t>(1, ai + bj - t.n);
      const int64_t hi = std::min(ai, bj);
      const double base = std::lgamma(a + 1) + std::lgamma(b + 1) + std::lgamma(n - a + 1) +
                          std::lgamma(n - b + 1) - lg_n;
      for (int64_t k = lo; k <= hi; ++k) {
        const double x = static_cast<double>(k);
        const double log_p = base - std::lgamma(x + 1) - std::lgamma(a - x + 1) -
                             std::lgamma(b - x + 1) - std::lgamma(n - a - b + x + 1);
        emi += x / n * std::log(n * x / (a * b)) * std::exp(log_p);
      }
    }
  }
  return emi;
}

bool degenerate(const Contingency& t, const char* metric) {
  if (t.row.size() > 1 && t.col.size() > 1) return false;
  std::cerr << "warning: " << metric << " of a single-cluster labeling is defined as 0\n";
  return true;
}

std::pair<int64_t, int64_t> overlap(const torch::Tensor& a, const torch::Tensor& b, double threshold) {
  if (a.sizes() != b.sizes()) {
    throw ShapeError("mask shapes differ: " + c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
  }
  auto ba = a.to(torch::kFloat64) >= threshold;
  auto bb = b.to(torch::kFloat64) >= threshold;
  return {(ba & bb).sum().item<int64_t>(), (ba | bb).sum().item<int64_t>()};
}

torch::Tensor as_model_input(const torch::Tensor& images, torch::ScalarType dtype) {
  if (images.scalar_type() == torch::kUInt8) return images.to(dtype) / 127.5 - 1.0;
  return images.to(dtype);
}

torch::ScalarType dtype_of(GeneratorSet& nets) { return nets.lut->v_c->weight.scalar_type(); }

} // namespace

// ---------------------------------------------------------------------------

std::string MetricReport::to_line() const {
  std::ostringstream os;
  os << std::setprecision(9) << "metric=" << metric << " value=" << value << " count=" << count
     << " config=" << (config_digest.empty() ? "-" : config_digest) << " iter=" << iteration;
  return os.str();
}

void append_results(const std::vector<MetricReport>& reports, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::app);
  if (!out) throw ValidationError("cannot open results file: " + file.string());
  for (const auto& r : reports) out << r.to_line() << '\n';
}

double conditional_is(const torch::Tensor& class_avg_preds) {
  if (class_avg_preds.dim() != 2 || class_avg_preds.size(0) == 0) {
    throw ShapeError("conditional_is expects a non-empty [K, C] matrix");
  }
  auto p = class_avg_preds.to(torch::kFloat64);
  if (p.min().item<double>() < 0 ||
      (p.sum(1) - 1).abs().max().item<double>() > 1e-6) {
    throw ValidationError("conditional_is: rows must be probability vectors");
  }
  auto marginal = p.mean(0, true);
  // 0 * log 0 contributes 0.
  auto ratio = torch::where(p > 0, torch::log(p / marginal), torch::zeros_like(p));
  auto kl = (p * ratio).sum(1);
  return std::exp(kl.mean().item<double>());
}

double entropy(const std::vector<int64_t>& labels) {
  std::map<int64_t, int64_t> counts;
  for (auto v : labels) ++counts[v];
  std::vector<int64_t> c;
  for (const auto& [k, v] : counts) c.push_back(v);
  return entropy_of(c, static_cast<int64_t>(labels.size()));
}

double mutual_information(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  return mi_of(contingency(a, b));
}

double nmi(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  const auto t = contingency(a, b);
  if (degenerate(t, "NMI")) return 0.0;
  const double norm = 0.5 * (entropy_of(t.row, t.n) + entropy_of(t.col, t.n));
  return std::clamp(mi_of(t) / norm, 0.0, 1.0);
}

double ami(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  const auto t = contingency(a, b);
  if (degenerate(t, "AMI")) return 0.0;
  const double mi = mi_of(t);
  const double emi = expected_mi(t);
  const double norm = 0.5 * (entropy_of(t.row, t.n) + entropy_of(t.col, t.n));
  double denom = norm - emi;
  const double eps = std::numeric_limits<double>::epsilon();
  if (std::abs(denom) < eps) denom = denom < 0 ? -eps : eps;
  return std::min((mi - emi) / denom, 1.0);
}

double iou(const torch::Tensor& a, const torch::Tensor& b, double threshold) {
  const auto [inter, uni] = overlap(a, b, threshold);
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double dice(const torch::Tensor& a, const torch::Tensor& b, double threshold) {
  const auto [inter, uni] = overlap(a, b, threshold);
  // |A| + |B| = |A ∪ B| + |A ∩ B|
  const auto total = uni + inter;
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

std::vector<int64_t> kmeans(const torch::Tensor& features, int64_t k, uint64_t seed, int attempts) {
  if (features.dim() != 2) throw ShapeError("kmeans expects [N, D] features");
  const auto n = features.size(0);
  if (k < 1) throw ValidationError("kmeans: k must be positive");
  if (k > n) throw ValidationError("kmeans: k exceeds the sample count");
  if (k == 1) return std::vector<int64_t>(static_cast<std::size_t>(n), 0);
  auto f = features.detach().to(torch::kFloat32).contiguous();
  cv::Mat data(static_cast<int>(n), static_cast<int>(f.size(1)), CV_32F, f.data_ptr<float>());
  cv::Mat labels, centers;
  cv::theRNG().state = seed == 0 ? 0x9e3779b97f4a7c15ULL : seed;
  cv::kmeans(data, static_cast<int>(k), labels,
             cv::TermCriteria(cv::TermCriteria::EPS + cv::TermCriteria::COUNT, 300, 1e-6), attempts,
             cv::KMEANS_PP_CENTERS, centers);
  std::vector<int64_t> out(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = labels.at<int>(static_cast<int>(i));
  return out;
}

torch::Tensor encode_codes(const torch::Tensor& images, GeneratorSet& nets, int64_t batch) {
  torch::NoGradGuard guard;
  nets.train(false);
  std::vector<torch::Tensor> parts;
  const auto dtype = dtype_of(nets);
  for (int64_t i = 0; i < images.size(0); i += batch) {
    auto x = as_model_input(images.slice(0, i, std::min(i + batch, images.size(0))), dtype);
    auto content = nets.e_p->forward(x);
    auto style = nets.e_c->forward(x);
    parts.push_back(torch::cat({content.mu_p, style.mu_c}, 1));
  }
  return torch::cat(parts, 0);
}

std::vector<int64_t> cluster_codes(const torch::Tensor& images, GeneratorSet& nets, int64_t k,
                                   uint64_t seed, int attempts) {
  if (k > images.size(0)) throw ValidationError("cluster_codes: k exceeds the sample count");
  return kmeans(encode_codes(images, nets), k, seed, attempts);
}

torch::Tensor predict_masks(GeneratorSet& nets, const torch::Tensor& images,
                            const MixupConfig& mixup, uint64_t seed, int64_t batch) {
  torch::NoGradGuard guard;
  nets.train(false);
  auto gen = make_generator(seed);
  const auto dtype = dtype_of(nets);
  AutoencodeOptions options;
  options.bypass = mixup.bypass;
  std::vector<torch::Tensor> parts;
  for (int64_t i = 0; i < images.size(0); i += batch) {
    auto x = as_model_input(images.slice(0, i, std::min(i + batch, images.size(0))), dtype);
    auto out = autoencode_path(x, nets, inference_mixup(mixup, x.size(0)), gen, options);
    parts.push_back(out.quad.mask);
  }
  return torch::cat(parts, 0);
}

SegmentationScores segmentation_eval(GeneratorSet& nets, const torch::Tensor& images,
                                     const torch::Tensor& masks, const MixupConfig& mixup,
                                     uint64_t seed, int64_t batch) {
  if (!masks.defined() || masks.size(0) != images.size(0)) {
    throw ValidationError("segmentation_eval: ground truth masks missing");
  }
  auto predicted = predict_masks(nets, images, mixup, seed, batch);
  SegmentationScores s;
  s.count = images.size(0);
  for (int64_t i = 0; i < s.count; ++i) {
    auto truth = masks[i].to(torch::kFloat64);
    s.iou += iou(predicted[i], truth);
    s.dice += dice(predicted[i], truth);
  }
  if (s.count > 0) {
    s.iou = 100.0 * s.iou / static_cast<double>(s.count);
    s.dice = 100.0 * s.dice / static_cast<double>(s.count);
  }
  return s;
}

// ---------------------------------------------------------------------------

OracleNetImpl::OracleNetImpl(int64_t n_classes) : n_classes(n_classes) {
  using torch::nn::Conv2dOptions;
  c1 = register_module("c1", torch::nn::Conv2d(Conv2dOptions(3, 32, 3).stride(2).padding(1)));
  c2 = register_module("c2", torch::nn::Conv2d(Conv2dOptions(32, 64, 3).stride(2).padding(1)));
  c3 = register_module("c3", torch::nn::Conv2d(Conv2dOptions(64, 64, 3).stride(2).padding(1)));
  fc = register_module("fc", torch::nn::Linear(128, n_classes));
}

torch::Tensor OracleNetImpl::forward(const torch::Tensor& x) {
  auto h = torch::relu(c1->forward(x));
  h = torch::relu(c2->forward(h));
  h = torch::relu(c3->forward(h));
  auto pooled = torch::cat({h.mean({2, 3}), h.amax({2, 3})}, 1);
  return fc->forward(pooled);
}

torch::Tensor OracleClassifier::predict(const torch::Tensor& images, int64_t batch) const {
  torch::NoGradGuard guard;
  auto model = net;  // holder copy shares the module
  model->eval();
  std::vector<torch::Tensor> parts;
  for (int64_t i = 0; i < images.size(0); i += batch) {
    auto x = as_model_input(images.slice(0, i, std::min(i + batch, images.size(0))), torch::kFloat32);
    parts.push_back(torch::softmax(model->forward(x), 1));
  }
  return torch::cat(parts, 0);
}

OracleClassifier train_oracle_classifier(const torch::Tensor& images, const torch::Tensor& labels,
                                         int64_t n_classes, const OracleOptions& options) {
  const auto n = images.size(0);
  if (n < 2 || labels.size(0) != n) throw ValidationError("oracle training set malformed");
  torch::manual_seed(options.seed);
  auto gen = make_generator(options.seed);
  auto perm = torch::randperm(n, gen, torch::kLong);
  const auto n_hold = std::max<int64_t>(1, static_cast<int64_t>(std::floor(options.holdout * n)));
  const auto n_train = n - n_hold;
  auto train_idx = perm.slice(0, 0, n_train);
  auto hold_idx = perm.slice(0, n_train);

  OracleClassifier oracle;
  oracle.net = OracleNet(n_classes);
  torch::optim::Adam opt(oracle.net->parameters(), torch::optim::AdamOptions(options.lr));
  auto x_all = images.index_select(0, train_idx);
  auto y_all = labels.index_select(0, train_idx).to(torch::kLong);
  for (int64_t epoch = 0; epoch < options.epochs; ++epoch) {
    oracle.net->train();
    auto order = torch::randperm(n_train, gen, torch::kLong);
    for (int64_t i = 0; i < n_train; i += options.batch) {
      auto idx = order.slice(0, i, std::min(i + options.batch, n_train));
      auto x = as_model_input(x_all.index_select(0, idx), torch::kFloat32);
      auto loss = F::cross_entropy(oracle.net->forward(x), y_all.index_select(0, idx));
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
  }
  auto probs = oracle.predict(images.index_select(0, hold_idx));
  auto truth = labels.index_select(0, hold_idx).to(torch::kLong);
  oracle.holdout_accuracy = probs.argmax(1).eq(truth).to(torch::kFloat64).mean().item<double>();
  oracle.certified = oracle.holdout_accuracy >= options.certify_floor;
  return oracle;
}

double conditional_is_protocol(GeneratorSet& nets, const OracleClassifier& oracle,
                               int64_t per_class, uint64_t seed) {
  if (!oracle.certified) {
    throw StateError("oracle classifier below the accuracy floor; C-IS not certified");
  }
  if (per_class < 1) throw ValidationError("per_class must be positive");
  torch::NoGradGuard guard;
  nets.train(false);
  const auto& hp = nets.hp;
  auto gen = make_generator(seed);
  const auto dtype = dtype_of(nets);
  std::vector<torch::Tensor> rows;
  for (int64_t k = 0; k < hp.n_child; ++k) {
    auto child = torch::full({per_class}, k, torch::kLong);
    auto z = torch::randn({per_class, hp.d_z}, gen).to(dtype);
    auto priors = make_priors(hp, child, parent_of(child, hp), z);
    auto out = generation_path(priors, nets);
    rows.push_back(oracle.predict(out.quad.image.to(torch::kFloat32)).to(torch::kFloat64).mean(0));
  }
  return conditional_is(torch::stack(rows));
}

} // namespace onegan
