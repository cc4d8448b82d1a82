// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "onegan/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "onegan/errors.hpp"

namespace fs = std::filesystem;

namespace onegan {

namespace {

cv::Mat center_square(const cv::Mat& img) {
  const int s = std::min(img.cols, img.rows);
  return img(cv::Rect((img.cols - s) / 2, (img.rows - s) / 2, s, s));
}

cv::Mat resize_to(const cv::Mat& img, int64_t side, int interpolation) {
  cv::Mat out;
  const int s = static_cast<int>(side);
  if (img.cols == s && img.rows == s) return img.clone();
  if (interpolation < 0) interpolation = img.cols > s ? cv::INTER_AREA : cv::INTER_LINEAR;
  cv::resize(img, out, cv::Size(s, s), 0, 0, interpolation);
  return out;
}

// HWC uint8 RGB -> [3, H, W] uint8.
torch::Tensor from_rgb_mat(const cv::Mat& rgb) {
  auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8);
  return t.permute({2, 0, 1}).contiguous().clone();
}

torch::Tensor from_bgr_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return from_rgb_mat(rgb);
}

cv::Mat to_bgr_mat(const torch::Tensor& chw) {
  auto hwc = chw.permute({1, 2, 0}).contiguous();
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3, hwc.data_ptr());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

std::optional<int64_t> parse_optional_int(const std::string& s) {
  if (s == "-") return std::nullopt;
  return std::stoll(s);
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::string stem_name(const std::string& prefix, int64_t i) {
  std::ostringstream os;
  os << prefix << std::setw(5) << std::setfill('0') << i << ".png";
  return os.str();
}

// Unit-area-agnostic unit polygons (radius ~1) per shape family.
std::vector<cv::Point2d> unit_shape(int64_t parent) {
  std::vector<cv::Point2d> pts;
  auto regular = [&](int n, double phase, double r_in = 0.0) {
    const int m = r_in > 0 ? 2 * n : n;
    for (int i = 0; i < m; ++i) {
      const double a = phase + 2.0 * std::numbers::pi * i / m;
      const double r = (r_in > 0 && i % 2 == 1) ? r_in : 1.0;
      pts.emplace_back(r * std::cos(a), r * std::sin(a));
    }
  };
  switch (parent % 8) {
    case 0: {  // ellipse
      for (int i = 0; i < 64; ++i) {
        const double a = 2.0 * std::numbers::pi * i / 64;
        pts.emplace_back(std::cos(a), 0.6 * std::sin(a));
      }
      break;
    }
    case 1: regular(3, -std::numbers::pi / 2); break;
    case 2:  // rectangle, aspect 2:1
      pts = {{-1, -0.5}, {1, -0.5}, {1, 0.5}, {-1, 0.5}};
      break;
    case 3: pts = {{0, -1}, {0.6, 0}, {0, 1}, {-0.6, 0}}; break;  // diamond
    case 4: regular(5, -std::numbers::pi / 2); break;
    case 5: regular(5, -std::numbers::pi / 2, 0.45); break;  // star
    case 6: regular(6, 0); break;
    default:  // cross
      pts = {{-0.3, -1}, {0.3, -1}, {0.3, -0.3}, {1, -0.3}, {1, 0.3}, {0.3, 0.3},
             {0.3, 1},   {-0.3, 1}, {-0.3, 0.3}, {-1, 0.3}, {-1, -0.3}, {-0.3, -0.3}};
      break;
  }
  return pts;
}

double polygon_area(const std::vector<cv::Point2d>& pts) {
  double a = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % pts.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2;
}

std::vector<cv::Point> posed(int64_t parent, const ScenePose& pose) {
  std::vector<cv::Point> out;
  const double c = std::cos(pose.angle), s = std::sin(pose.angle);
  for (const auto& p : unit_shape(parent)) {
    const double x = pose.cx + pose.scale * (c * p.x - s * p.y);
    const double y = pose.cy + pose.scale * (s * p.x + c * p.y);
    out.emplace_back(static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)));
  }
  return out;
}

cv::Mat support_mat(int64_t parent, const ScenePose& pose, int64_t side) {
  cv::Mat mask = cv::Mat::zeros(static_cast<int>(side), static_cast<int>(side), CV_8UC1);
  std::vector<std::vector<cv::Point>> polys{posed(parent, pose)};
  cv::fillPoly(mask, polys, cv::Scalar(1), cv::LINE_8);
  return mask;
}

cv::Vec3b hsv_to_rgb(double hue, double sat, double val) {
  cv::Mat hsv(1, 1, CV_8UC3,
              cv::Scalar(std::fmod(hue, 180.0), std::clamp(sat, 0.0, 255.0), std::clamp(val, 0.0, 255.0)));
  cv::Mat rgb;
  cv::cvtColor(hsv, rgb, cv::COLOR_HSV2RGB);
  return rgb.at<cv::Vec3b>(0, 0);
}

// Per-parent gradient plus band-limited noise. Returns RGB.
cv::Mat render_texture(int64_t parent, int64_t n_parent, int64_t side, std::mt19937_64& rng) {
  const int s = static_cast<int>(side);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double hue = std::fmod(90.0 + 180.0 * static_cast<double>(parent) / n_parent, 180.0);
  const double dir = std::numbers::pi * static_cast<double>(parent) / n_parent + 0.3 * (unit(rng) - 0.5);
  const auto c0 = hsv_to_rgb(hue, 50 + 20 * unit(rng), 110 + 20 * unit(rng));
  const auto c1 = hsv_to_rgb(hue + 10, 70 + 20 * unit(rng), 190 + 20 * unit(rng));

  cv::Mat coarse(8, 8, CV_32F);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) coarse.at<float>(y, x) = static_cast<float>(2 * unit(rng) - 1);
  cv::Mat noise;
  cv::resize(coarse, noise, cv::Size(s, s), 0, 0, cv::INTER_CUBIC);

  cv::Mat out(s, s, CV_8UC3);
  const double dx = std::cos(dir), dy = std::sin(dir);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double u = ((x - s / 2.0) * dx + (y - s / 2.0) * dy) / s + 0.5;
      const double t = std::clamp(u, 0.0, 1.0);
      const double n = 18.0 * noise.at<float>(y, x);
      cv::Vec3b px;
      for (int k = 0; k < 3; ++k) {
        px[k] = cv::saturate_cast<uint8_t>(c0[k] * (1 - t) + c1[k] * t + n);
      }
      out.at<cv::Vec3b>(y, x) = px;
    }
  }
  return out;
}

} // namespace

// ---------------------------------------------------------------------------

torch::Tensor read_image(const fs::path& path, int64_t side) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw ValidationError("cannot decode image: " + path.string());
  return from_bgr_mat(resize_to(center_square(img), side, -1));
}

torch::Tensor read_mask(const fs::path& path, int64_t side) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw ValidationError("cannot decode mask: " + path.string());
  cv::Mat m = resize_to(center_square(img), side, cv::INTER_NEAREST);
  cv::Mat bin = m > 0;
  auto t = torch::from_blob(bin.data, {1, bin.rows, bin.cols}, torch::kUInt8).clone();
  return (t > 0).to(torch::kUInt8);
}

torch::Tensor to_model_range(const torch::Tensor& images) {
  return images.to(torch::kFloat32) / 127.5 - 1.0;
}

torch::Tensor to_uint8(const torch::Tensor& images) {
  return ((images.detach().to(torch::kFloat32).clamp(-1, 1) + 1) * 127.5).round().to(torch::kUInt8);
}

void write_png(const torch::Tensor& image, const fs::path& path) {
  if (image.dim() != 3 || (image.size(0) != 1 && image.size(0) != 3)) {
    throw ShapeError("write_png: expected [1|3, H, W], got " + c10::str(image.sizes()));
  }
  torch::Tensor u8;
  if (image.scalar_type() == torch::kUInt8) {
    u8 = image;
    if (image.size(0) == 1 && image.max().item<int>() <= 1) u8 = image * 255;
  } else if (image.size(0) == 1) {
    u8 = (image.detach().to(torch::kFloat32).clamp(0, 1) * 255).round().to(torch::kUInt8);
  } else {
    u8 = to_uint8(image);
  }
  u8 = u8.contiguous();
  ensure_parent(path);
  cv::Mat out;
  if (u8.size(0) == 1) {
    out = cv::Mat(static_cast<int>(u8.size(1)), static_cast<int>(u8.size(2)), CV_8UC1, u8.data_ptr())
              .clone();
  } else {
    out = to_bgr_mat(u8);
  }
  if (!cv::imwrite(path.string(), out)) throw ValidationError("cannot write image: " + path.string());
}

torch::Tensor make_grid(const std::vector<torch::Tensor>& rows, int64_t padding) {
  if (rows.empty()) throw ValidationError("make_grid: no rows");
  const auto n = rows[0].size(0), h = rows[0].size(2), w = rows[0].size(3);
  const int64_t r = static_cast<int64_t>(rows.size());
  auto grid = torch::full({3, r * (h + padding) + padding, n * (w + padding) + padding}, 255,
                          torch::kUInt8);
  for (int64_t i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (row.dim() != 4 || row.size(0) != n || row.size(2) != h || row.size(3) != w) {
      throw ShapeError("make_grid: row shapes differ");
    }
    torch::Tensor u8;
    if (row.size(1) == 1) {
      u8 = (row.detach().to(torch::kFloat32).clamp(0, 1) * 255).round().to(torch::kUInt8).expand({n, 3, h, w});
    } else {
      u8 = to_uint8(row);
    }
    for (int64_t j = 0; j < n; ++j) {
      const auto y0 = padding + i * (h + padding), x0 = padding + j * (w + padding);
      grid.slice(1, y0, y0 + h).slice(2, x0, x0 + w).copy_(u8[j]);
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------

std::vector<ManifestRecord> read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open manifest: " + file.string());
  std::vector<ManifestRecord> out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 5) {
      throw ValidationError("manifest line " + std::to_string(lineno) + ": expected 5 fields");
    }
    ManifestRecord r;
    r.path = f[0];
    r.split = f[1];
    r.phi_p = parse_optional_int(f[2]);
    r.phi_c = parse_optional_int(f[3]);
    if (f[4] != "-") r.mask = f[4];
    out.push_back(std::move(r));
  }
  return out;
}

void write_manifest(const std::vector<ManifestRecord>& records, const fs::path& file) {
  ensure_parent(file);
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write manifest: " + file.string());
  auto opt = [](const std::optional<int64_t>& v) { return v ? std::to_string(*v) : std::string("-"); };
  for (const auto& r : records) {
    out << r.path << '\t' << r.split << '\t' << opt(r.phi_p) << '\t' << opt(r.phi_c) << '\t'
        << r.mask.value_or("-") << '\n';
  }
}

Dataset load_dataset(const fs::path& root, int64_t side) {
  const auto manifest = root / "manifest.tsv";
  if (!fs::exists(manifest)) throw ConfigError("dataset manifest missing: " + manifest.string());
  std::vector<torch::Tensor> obj, bg, ev, evm, orc;
  std::vector<int64_t> evp, evc, orcc;
  bool masks_complete = true, labels_complete = true;
  for (const auto& r : read_manifest(manifest)) {
    auto img = read_image(root / r.path, side);
    if (r.split == "object") {
      obj.push_back(img);
    } else if (r.split == "background") {
      bg.push_back(img);
    } else if (r.split == "eval") {
      ev.push_back(img);
      if (r.mask) evm.push_back(read_mask(root / *r.mask, side)); else masks_complete = false;
      if (r.phi_p && r.phi_c) {
        evp.push_back(*r.phi_p - 1);
        evc.push_back(*r.phi_c - 1);
      } else {
        labels_complete = false;
      }
    } else if (r.split == "oracle") {
      if (!r.phi_c) throw ValidationError("oracle record without child label: " + r.path);
      orc.push_back(img);
      orcc.push_back(*r.phi_c - 1);
    } else {
      throw ValidationError("unknown manifest split: " + r.split);
    }
  }
  auto stack = [](const std::vector<torch::Tensor>& v) {
    return v.empty() ? torch::Tensor() : torch::stack(v);
  };
  Dataset d;
  d.objects = stack(obj);
  d.backgrounds = stack(bg);
  d.eval_images = stack(ev);
  if (!ev.empty() && masks_complete) d.eval_masks = stack(evm);
  if (!ev.empty() && labels_complete) {
    d.eval_parent = torch::tensor(evp, torch::kLong);
    d.eval_child = torch::tensor(evc, torch::kLong);
  }
  d.oracle_images = stack(orc);
  if (!orc.empty()) d.oracle_child = torch::tensor(orcc, torch::kLong);
  return d;
}

// ---------------------------------------------------------------------------

int64_t object_source_count(int64_t n_sources) {
  if (n_sources < 0) throw ValidationError("negative source count");
  return n_sources * 8 / 10;
}

std::vector<BoundingBox> background_regions(int image_width, int image_height,
                                            const BoundingBox& box, int min_side, int max_patches) {
  const int x0 = std::clamp(box.x, 0, image_width);
  const int y0 = std::clamp(box.y, 0, image_height);
  const int x1 = std::clamp(box.x + box.width, 0, image_width);
  const int y1 = std::clamp(box.y + box.height, 0, image_height);
  const BoundingBox candidates[] = {
      {0, 0, x0, image_height},
      {x1, 0, image_width - x1, image_height},
      {0, 0, image_width, y0},
      {0, y1, image_width, image_height - y1},
  };
  std::vector<BoundingBox> out;
  for (const auto& c : candidates) {
    if (static_cast<int>(out.size()) >= max_patches) break;
    if (std::min(c.width, c.height) >= min_side) out.push_back(c);
  }
  return out;
}

std::vector<SourceImage> read_boxes(const fs::path& boxes_file) {
  std::ifstream in(boxes_file);
  if (!in) throw ConfigError("cannot open box annotations: " + boxes_file.string());
  std::vector<SourceImage> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    SourceImage s;
    ss >> s.id;
    BoundingBox b;
    if (ss >> b.x >> b.y >> b.width >> b.height) s.box = b;
    out.push_back(std::move(s));
  }
  return out;
}

DatasetSplit ingest_real(const fs::path& dataset_dir, const fs::path& boxes_file,
                         const fs::path& out_root, int64_t side, uint64_t seed) {
  auto sources = read_boxes(boxes_file);
  std::mt19937_64 rng(seed);
  std::shuffle(sources.begin(), sources.end(), rng);
  const auto n_obj = object_source_count(static_cast<int64_t>(sources.size()));

  DatasetSplit split;
  std::vector<ManifestRecord> manifest;
  for (int64_t i = 0; i < static_cast<int64_t>(sources.size()); ++i) {
    const auto& src = sources[static_cast<std::size_t>(i)];
    if (i < n_obj) {
      auto rel = fs::path("objects") / stem_name("obj_", i);
      write_png(read_image(dataset_dir / src.id, side), out_root / rel);
      manifest.push_back({rel.string(), "object", std::nullopt, std::nullopt, std::nullopt});
      split.objects.push_back(src.id);
      continue;
    }
    if (!src.box) {
      std::cerr << "warning: no bounding box for " << src.id << ", skipped\n";
      continue;
    }
    cv::Mat img = cv::imread((dataset_dir / src.id).string(), cv::IMREAD_COLOR);
    if (img.empty()) {
      std::cerr << "warning: cannot decode " << src.id << ", skipped\n";
      continue;
    }
    const auto regions = background_regions(img.cols, img.rows, *src.box);
    for (std::size_t k = 0; k < regions.size(); ++k) {
      const auto& r = regions[k];
      cv::Mat patch = img(cv::Rect(r.x, r.y, r.width, r.height));
      auto rel = fs::path("backgrounds") /
                 stem_name("bg_" + std::to_string(i) + "_" + std::to_string(k) + "_", 0);
      write_png(from_bgr_mat(resize_to(center_square(patch), side, -1)), out_root / rel);
      manifest.push_back({rel.string(), "background", std::nullopt, std::nullopt, std::nullopt});
      split.backgrounds.push_back(rel.string());
    }
    if (!regions.empty()) split.background_sources.push_back(src.id);
  }
  if (split.backgrounds.empty()) throw ValidationError("ingest produced no background patches");
  write_manifest(manifest, out_root / "manifest.tsv");
  return split;
}

// ---------------------------------------------------------------------------

void SyntheticSceneSpec::validate() const {
  if (n_parent < 1 || n_parent > 8) throw ValidationError("synthetic n_parent must be in [1, 8]");
  if (colors_per_shape < 1) throw ValidationError("colors_per_shape must be positive");
  if (image_size < 16) throw ValidationError("synthetic image_size too small");
  if (!(fg_min > 0 && fg_min < fg_max && fg_max < 1)) {
    throw ValidationError("foreground fraction bounds must satisfy 0 < min < max < 1");
  }
}

std::vector<std::vector<int>> shape_polygon(int64_t parent, const ScenePose& pose) {
  std::vector<std::vector<int>> out;
  for (const auto& p : posed(parent, pose)) out.push_back({p.x, p.y});
  return out;
}

torch::Tensor render_support(int64_t parent, const ScenePose& pose, int64_t side) {
  cv::Mat m = support_mat(parent, pose, side);
  return torch::from_blob(m.data, {1, m.rows, m.cols}, torch::kUInt8).clone();
}

std::vector<uint8_t> child_color(int64_t child, int64_t n_child) {
  const auto c = hsv_to_rgb(180.0 * static_cast<double>(child) / static_cast<double>(n_child), 230, 235);
  return {c[0], c[1], c[2]};
}

SyntheticSet generate_synthetic(const SyntheticSceneSpec& spec, int64_t count,
                                int64_t background_count, uint64_t seed,
                                std::vector<ScenePose>* poses) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto side = spec.image_size;
  const auto n_child = spec.n_child();
  const double px = static_cast<double>(side * side);

  std::vector<torch::Tensor> images, masks, backgrounds;
  std::vector<int64_t> parents, children;
  if (poses) poses->clear();

  for (int64_t i = 0; i < count; ++i) {
    const auto child = std::min<int64_t>(static_cast<int64_t>(unit(rng) * n_child), n_child - 1);
    const auto parent = child / spec.colors_per_shape;
    cv::Mat scene = render_texture(parent, spec.n_parent, side, rng);

    const auto unit_pts = unit_shape(parent);
    const double area = polygon_area(unit_pts);
    double radius = 0;
    for (const auto& p : unit_pts) radius = std::max(radius, std::hypot(p.x, p.y));

    ScenePose pose;
    cv::Mat support;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw StateError("synthetic pose sampling did not converge");
      const double margin = 0.1 * (spec.fg_max - spec.fg_min);
      const double target = spec.fg_min + margin + unit(rng) * (spec.fg_max - spec.fg_min - 2 * margin);
      pose.scale = std::sqrt(target * px / area);
      pose.angle = 2.0 * std::numbers::pi * unit(rng);
      const double reach = std::min(pose.scale * radius, side / 2.0);
      pose.cx = reach + unit(rng) * (side - 2 * reach);
      pose.cy = reach + unit(rng) * (side - 2 * reach);
      support = support_mat(parent, pose, side);
      const double frac = cv::countNonZero(support) / px;
      if (frac >= spec.fg_min && frac <= spec.fg_max) break;
    }

    const auto color = child_color(child, n_child);
    for (int y = 0; y < scene.rows; ++y) {
      const double shade = 0.85 + 0.15 * static_cast<double>(y) / static_cast<double>(scene.rows);
      for (int x = 0; x < scene.cols; ++x) {
        if (!support.at<uint8_t>(y, x)) continue;
        auto& p = scene.at<cv::Vec3b>(y, x);
        for (int k = 0; k < 3; ++k) p[k] = cv::saturate_cast<uint8_t>(color[static_cast<std::size_t>(k)] * shade);
      }
    }
    images.push_back(from_rgb_mat(scene));
    masks.push_back(torch::from_blob(support.data, {1, support.rows, support.cols}, torch::kUInt8).clone());
    parents.push_back(parent);
    children.push_back(child);
    if (poses) poses->push_back(pose);
  }
  for (int64_t i = 0; i < background_count; ++i) {
    const auto parent = std::min<int64_t>(static_cast<int64_t>(unit(rng) * spec.n_parent), spec.n_parent - 1);
    backgrounds.push_back(from_rgb_mat(render_texture(parent, spec.n_parent, side, rng)));
  }

  SyntheticSet set;
  auto stack = [&](const std::vector<torch::Tensor>& v, std::vector<int64_t> shape) {
    return v.empty() ? torch::empty(shape, torch::kUInt8) : torch::stack(v);
  };
  set.images = stack(images, {0, 3, side, side});
  set.masks = stack(masks, {0, 1, side, side});
  set.backgrounds = stack(backgrounds, {0, 3, side, side});
  set.parent = torch::tensor(parents, torch::kLong);
  set.child = torch::tensor(children, torch::kLong);
  return set;
}

void write_synthetic(const SyntheticSet& train, const SyntheticSet& eval,
                     const SyntheticSet& oracle, const fs::path& root) {
  std::vector<ManifestRecord> manifest;
  for (int64_t i = 0; i < train.images.size(0); ++i) {
    auto rel = fs::path("objects") / stem_name("obj_", i);
    write_png(train.images[i], root / rel);
    manifest.push_back({rel.string(), "object", std::nullopt, std::nullopt, std::nullopt});
  }
  for (int64_t i = 0; i < train.backgrounds.size(0); ++i) {
    auto rel = fs::path("backgrounds") / stem_name("bg_", i);
    write_png(train.backgrounds[i], root / rel);
    manifest.push_back({rel.string(), "background", std::nullopt, std::nullopt, std::nullopt});
  }
  for (int64_t i = 0; i < eval.images.size(0); ++i) {
    auto rel = fs::path("eval") / stem_name("img_", i);
    auto mrel = fs::path("eval") / stem_name("mask_", i);
    write_png(eval.images[i], root / rel);
    write_png(eval.masks[i], root / mrel);
    manifest.push_back({rel.string(), "eval", eval.parent[i].item<int64_t>() + 1,
                        eval.child[i].item<int64_t>() + 1, mrel.string()});
  }
  for (int64_t i = 0; i < oracle.images.size(0); ++i) {
    auto rel = fs::path("oracle") / stem_name("img_", i);
    write_png(oracle.images[i], root / rel);
    manifest.push_back({rel.string(), "oracle", oracle.parent[i].item<int64_t>() + 1,
                        oracle.child[i].item<int64_t>() + 1, std::nullopt});
  }
  write_manifest(manifest, root / "manifest.tsv");
}

// ---------------------------------------------------------------------------

BatchIterator::BatchIterator(torch::Tensor objects, torch::Tensor backgrounds, int64_t batch_size,
                             uint64_t seed, bool hflip)
    : objects_(std::move(objects)),
      backgrounds_(std::move(backgrounds)),
      batch_size_(batch_size),
      seed_(seed),
      hflip_(hflip) {
  if (!objects_.defined() || objects_.size(0) == 0) throw ValidationError("empty object set");
  if (batch_size_ <= 0) throw ValidationError("batch_size must be positive");
  if (batch_size_ > objects_.size(0)) {
    throw ValidationError("batch_size " + std::to_string(batch_size_) + " exceeds object set size " +
                          std::to_string(objects_.size(0)));
  }
  if (backgrounds_.defined() && backgrounds_.size(0) > 0 && batch_size_ > backgrounds_.size(0)) {
    throw ValidationError("batch_size " + std::to_string(batch_size_) +
                          " exceeds background set size " + std::to_string(backgrounds_.size(0)));
  }
}

std::vector<int64_t> BatchIterator::order(int64_t n, int64_t epoch, uint64_t salt) const {
  std::seed_seq seq{seed_, static_cast<uint64_t>(epoch), salt};
  std::mt19937_64 rng(seq);
  std::vector<int64_t> idx(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle.
  for (int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<int64_t>(rng() % static_cast<uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

torch::Tensor BatchIterator::take(const torch::Tensor& source, int64_t& epoch, int64_t& cursor,
                                  uint64_t salt) {
  const auto n = source.size(0);
  if (cursor + batch_size_ > n) {
    ++epoch;
    cursor = 0;
  }
  const auto idx = order(n, epoch, salt);
  std::vector<int64_t> pick(idx.begin() + cursor, idx.begin() + cursor + batch_size_);
  auto batch = to_model_range(source.index_select(0, torch::tensor(pick, torch::kLong)));
  if (hflip_) {
    std::seed_seq seq{seed_, static_cast<uint64_t>(epoch), salt + 1};
    std::mt19937_64 rng(seq);
    std::vector<bool> flip(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i) flip[static_cast<std::size_t>(i)] = (rng() >> 63) != 0;
    for (int64_t b = 0; b < batch_size_; ++b) {
      if (flip[static_cast<std::size_t>(cursor + b)]) batch[b] = batch[b].flip({2});
    }
  }
  cursor += batch_size_;
  return batch;
}

std::pair<torch::Tensor, torch::Tensor> BatchIterator::next() {
  auto objects = take(objects_, state_.epoch, state_.cursor, 0x6f626a);
  torch::Tensor backgrounds;
  if (backgrounds_.defined() && backgrounds_.size(0) > 0) {
    backgrounds = take(backgrounds_, state_.bg_epoch, state_.bg_cursor, 0x626b67);
  }
  return {objects, backgrounds};
}

} // namespace onegan
