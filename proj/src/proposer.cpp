#include "uoiskit/proposer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "uoiskit/dataset.hpp"
#include "uoiskit/error.hpp"
#include "uoiskit/rng.hpp"

namespace uoiskit {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTokenStream = 0x746F6B656E000000ULL;

struct Crop {
  int x0, y0, x1, y1;
};

Crop padded_crop(const BoundingBox& box, int pad, ImageSize size) {
  return {std::max(0, box.x0 - pad), std::max(0, box.y0 - pad), std::min(size.w - 1, box.x1 + pad),
          std::min(size.h - 1, box.y1 + pad)};
}

std::vector<PixelPoint> disk_offsets(int radius) {
  std::vector<PixelPoint> out;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) out.push_back({dx, dy});
    }
  }
  return out;
}

// Randomly grows or shrinks the mask by up to `amplitude` pixels, with an
// independent radius per angular sector around the centroid.
BinaryMask boundary_noise(const BinaryMask& mask, int amplitude, int sectors, Rng& rng) {
  const auto box = mask_bbox(mask);
  if (amplitude <= 0 || !box) return mask;
  const Centroid c = mask_centroid(mask);
  const double sector_width = 2.0 * std::numbers::pi / sectors;
  const double phase = uniform(rng, 0.0, sector_width);
  std::vector<int> radius(static_cast<std::size_t>(sectors));
  for (int& r : radius) r = uniform_int(rng, -amplitude, amplitude);

  const ImageSize size = mask.size();
  const DenseMask src = to_dense(mask);
  DenseMask out = src;
  const Crop crop = padded_crop(*box, amplitude, size);
  std::vector<std::vector<PixelPoint>> offsets(static_cast<std::size_t>(amplitude) + 1);
  for (int r = 1; r <= amplitude; ++r) offsets[static_cast<std::size_t>(r)] = disk_offsets(r);
  auto inside = [&](int x, int y) { return size.contains(x, y) && src.at(x, y); };
  for (int y = crop.y0; y <= crop.y1; ++y) {
    for (int x = crop.x0; x <= crop.x1; ++x) {
      double angle = std::atan2(y - c.y, x - c.x) - phase;
      angle = std::fmod(angle + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
      const int s = std::min(sectors - 1, static_cast<int>(angle / sector_width));
      const int r = radius[static_cast<std::size_t>(s)];
      if (r == 0) continue;
      const bool in = src.at(x, y);
      if ((r > 0) == in) continue;
      // Grow: any mask pixel within r. Shrink: any outside pixel within |r|.
      bool hit = false;
      for (const PixelPoint& o : offsets[static_cast<std::size_t>(std::abs(r))]) {
        if (inside(x + o.x, y + o.y) != in) {
          hit = true;
          break;
        }
      }
      if (hit) out.at(x, y) = r > 0 ? 1 : 0;
    }
  }
  BinaryMask noisy = rle_encode(out);
  return mask_area(noisy) > 0 ? noisy : mask;
}

BinaryMask subpart_mask(const BinaryMask& mask, PixelPoint prompt, Rng& rng) {
  const Centroid c = mask_centroid(mask);
  const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double nx = std::cos(theta), ny = std::sin(theta);
  const double side = ((prompt.x - c.x) * nx + (prompt.y - c.y) * ny) >= 0.0 ? 1.0 : -1.0;
  const DenseMask src = to_dense(mask);
  const ImageSize size = mask.size();
  auto allowed = [&](int x, int y) {
    return src.at(x, y) && side * ((x - c.x) * nx + (y - c.y) * ny) >= 0.0;
  };
  DenseMask out(size);
  std::vector<PixelPoint> stack{prompt};
  out.at(prompt.x, prompt.y) = 1;
  while (!stack.empty()) {
    const PixelPoint p = stack.back();
    stack.pop_back();
    const PixelPoint next[4] = {{p.x - 1, p.y}, {p.x + 1, p.y}, {p.x, p.y - 1}, {p.x, p.y + 1}};
    for (const PixelPoint& q : next) {
      if (!size.contains(q.x, q.y) || out.at(q.x, q.y) || !allowed(q.x, q.y)) continue;
      out.at(q.x, q.y) = 1;
      stack.push_back(q);
    }
  }
  return rle_encode(out);
}

BinaryMask whole_mask(const Scene& scene, std::size_t index, const OracleConfig& cfg) {
  const BinaryMask& mask = scene.instances[index];
  const BinaryMask reach = rle_encode(dilate_disk(to_dense(mask), std::max(cfg.neighbor_gap, 1)));
  std::size_t best_contact = 0;
  std::optional<std::size_t> neighbor;
  for (std::size_t j = 0; j < scene.instances.size(); ++j) {
    if (j == index) continue;
    const std::size_t contact = intersection_area(reach, scene.instances[j]);
    if (contact > best_contact) {
      best_contact = contact;
      neighbor = j;
    }
  }
  if (neighbor) return mask_union(mask, scene.instances[*neighbor]);
  const double eq_radius = std::sqrt(static_cast<double>(mask_area(mask)) / std::numbers::pi);
  const int radius = std::max(1, static_cast<int>(std::lround(cfg.whole_dilation * eq_radius)));
  return rle_encode(dilate_disk(to_dense(mask), radius));
}

BinaryMask background_blob(const Scene& scene, PixelPoint prompt, int slot, Rng& rng) {
  const ImageSize size = scene.size();
  const double scale[kSlotCount] = {1.0, 1.6, 1.0, 0.6};
  const double base = std::min(size.h, size.w);
  const double r = std::max(2.0, uniform(rng, 0.04, 0.10) * base * scale[slot]);
  const double theta = uniform(rng, -0.3, 0.3) + slot * std::numbers::pi / 2.0;
  const double dist = r + uniform(rng, 1.0, 3.0);
  const double cx = prompt.x + dist * std::cos(theta);
  const double cy = prompt.y + dist * std::sin(theta);
  const std::vector<std::uint8_t> fg = rle_decode(scene.foreground);
  DenseMask disk(size), blob(size);
  bool any_background = false;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r))), x1 = std::min(size.w - 1, static_cast<int>(std::ceil(cx + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r))), y1 = std::min(size.h - 1, static_cast<int>(std::ceil(cy + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
      disk.at(x, y) = 1;
      if (!fg[static_cast<std::size_t>(y) * size.w + x]) {
        blob.at(x, y) = 1;
        any_background = true;
      }
    }
  }
  return rle_encode(any_background ? blob : disk);
}

}  // namespace

void OracleConfig::validate() const {
  if (channels < 8) fail(ErrorKind::ConfigError, "token width C must be at least 8");
  if (channels < kTokenStatCount) {
    fail(ErrorKind::ConfigError, "token width C must hold the " + std::to_string(kTokenStatCount) + " statistics");
  }
  if (score_noise < 0.0 || token_noise < 0.0) fail(ErrorKind::ConfigError, "noise levels must be non-negative");
  if (boundary_noise < 0) fail(ErrorKind::ConfigError, "boundary noise amplitude must be non-negative");
  if (noise_sectors < 1) fail(ErrorKind::ConfigError, "noise_sectors must be at least 1");
  if (whole_dilation < 0.0 || neighbor_gap < 0) fail(ErrorKind::ConfigError, "whole-mask parameters must be non-negative");
}

json to_json(const OracleConfig& c) {
  return {{"whole_bias", c.whole_bias},     {"boundary_noise", c.boundary_noise}, {"noise_sectors", c.noise_sectors},
          {"score_noise", c.score_noise},   {"token_noise", c.token_noise},       {"channels", c.channels},
          {"whole_dilation", c.whole_dilation}, {"neighbor_gap", c.neighbor_gap}};
}

OracleConfig oracle_config_from_json(const json& j) {
  OracleConfig c;
  c.whole_bias = j.value("whole_bias", c.whole_bias);
  c.boundary_noise = j.value("boundary_noise", c.boundary_noise);
  c.noise_sectors = j.value("noise_sectors", c.noise_sectors);
  c.score_noise = j.value("score_noise", c.score_noise);
  c.token_noise = j.value("token_noise", c.token_noise);
  c.channels = j.value("channels", c.channels);
  c.whole_dilation = j.value("whole_dilation", c.whole_dilation);
  c.neighbor_gap = j.value("neighbor_gap", c.neighbor_gap);
  return c;
}

std::vector<double> synth_tokens(const BinaryMask& mask, PixelPoint prompt, double base_score, int slot,
                                 const OracleConfig& cfg, std::uint64_t seed) {
  const ImageSize size = mask.size();
  std::vector<double> token(static_cast<std::size_t>(cfg.channels), 0.0);
  const std::size_t area = mask_area(mask);
  const double frac = static_cast<double>(area) / static_cast<double>(size.pixels());
  token[0] = frac;
  token[1] = std::sqrt(frac);
  if (area > 0) {
    const DenseMask edge = boundary_pixels(to_dense(mask));
    const auto perimeter = std::count(edge.bits.begin(), edge.bits.end(), std::uint8_t{1});
    token[2] = static_cast<double>(perimeter) / static_cast<double>(area);
    const Centroid c = mask_centroid(mask);
    token[3] = (c.x - prompt.x) / size.w;
    token[4] = (c.y - prompt.y) / size.h;
  }
  if (slot >= 0 && slot <= kIouTokenSlot) token[5 + static_cast<std::size_t>(slot)] = 1.0;
  token[10] = base_score;
  token[11] = mask.contains(prompt) ? 1.0 : 0.0;
  Rng rng(derive_seed(seed ^ kTokenStream, static_cast<std::uint64_t>(slot)));
  for (std::size_t i = kTokenStatCount; i < token.size(); ++i) token[i] = gaussian(rng, cfg.token_noise);
  return token;
}

MaskProposal propose(const Scene& scene, PixelPoint prompt, const OracleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const ImageSize size = scene.size();
  if (!size.contains(prompt.x, prompt.y)) {
    fail(ErrorKind::InvalidPrompt, "prompt (" + std::to_string(prompt.x) + "," + std::to_string(prompt.y) +
                                       ") outside " + std::to_string(size.h) + "x" + std::to_string(size.w) + " image");
  }
  Rng rng(seed);
  MaskProposal out;
  out.prompt = prompt;
  const auto slot = [](Slot s) { return static_cast<std::size_t>(s); };
  std::array<double, kSlotCount> quality{};

  if (const auto index = scene.instance_at(prompt)) {
    const BinaryMask& gt = scene.instances[*index];
    out.masks[slot(Slot::Part)] = boundary_noise(gt, cfg.boundary_noise, cfg.noise_sectors, rng);
    out.masks[slot(Slot::Default)] = boundary_noise(out.masks[slot(Slot::Part)], cfg.boundary_noise, cfg.noise_sectors, rng);
    out.masks[slot(Slot::Subpart)] = subpart_mask(gt, prompt, rng);
    out.masks[slot(Slot::Whole)] = whole_mask(scene, *index, cfg);
    for (std::size_t k = 0; k < kSlotCount; ++k) quality[k] = mask_iou(gt, out.masks[k]);
  } else {
    for (int k = 0; k < kSlotCount; ++k) {
      out.masks[static_cast<std::size_t>(k)] = background_blob(scene, prompt, k, rng);
      quality[static_cast<std::size_t>(k)] = uniform(rng, 0.3, 0.9);
    }
  }

  for (std::size_t k = 0; k < kSlotCount; ++k) {
    const double bias = k == slot(Slot::Whole) ? cfg.whole_bias : 0.0;
    out.base_scores[k] = std::clamp(quality[k] + bias + gaussian(rng, cfg.score_noise), 0.0, 1.0);
  }
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    out.mask_tokens[k] = synth_tokens(out.masks[k], prompt, out.base_scores[k], static_cast<int>(k), cfg, seed);
  }
  const double top = *std::max_element(out.base_scores.begin(), out.base_scores.end());
  out.iou_token = synth_tokens(out.masks[slot(Slot::Default)], prompt, top, kIouTokenSlot, cfg, seed);
  return out;
}

std::array<double, kSlotCount> true_ious(const MaskProposal& proposal, const Scene& scene) {
  std::array<double, kSlotCount> out{};
  const auto index = scene.instance_at(proposal.prompt);
  if (!index) return out;
  for (std::size_t k = 0; k < kSlotCount; ++k) out[k] = mask_iou(scene.instances[*index], proposal.masks[k]);
  return out;
}

OracleProposer::OracleProposer(OracleConfig cfg) : cfg_(cfg) { cfg_.validate(); }

MaskProposal OracleProposer::propose(const Scene& scene, std::size_t, PixelPoint prompt, std::uint64_t seed) const {
  return uoiskit::propose(scene, prompt, cfg_, seed);
}

json proposal_to_json(const MaskProposal& p) {
  json masks = json::array(), tokens = json::array();
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    masks.push_back(mask_to_json(p.masks[k]));
    tokens.push_back(p.mask_tokens[k]);
  }
  return {{"prompt", {p.prompt.x, p.prompt.y}},
          {"masks", std::move(masks)},
          {"base_scores", p.base_scores},
          {"iou_token", p.iou_token},
          {"mask_tokens", std::move(tokens)}};
}

MaskProposal proposal_from_json(const json& j) {
  MaskProposal p;
  try {
    const auto prompt = j.at("prompt").get<std::array<int, 2>>();
    p.prompt = {prompt[0], prompt[1]};
    const json& masks = j.at("masks");
    const json& tokens = j.at("mask_tokens");
    if (masks.size() != kSlotCount || tokens.size() != kSlotCount) {
      fail(ErrorKind::DatasetError, "a recorded proposal must hold exactly 4 masks and 4 mask tokens");
    }
    for (std::size_t k = 0; k < kSlotCount; ++k) {
      p.masks[k] = mask_from_json(masks[k]);
      p.mask_tokens[k] = tokens[k].get<std::vector<double>>();
    }
    p.base_scores = j.at("base_scores").get<std::array<double, kSlotCount>>();
    p.iou_token = j.at("iou_token").get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::DatasetError, std::string("malformed proposal record: ") + e.what());
  }
  return p;
}

ReplayProposer::ReplayProposer(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  try {
    for (const json& rec : doc.at("proposals")) {
      MaskProposal p = proposal_from_json(rec.at("proposal"));
      const auto scene = rec.at("scene").get<std::size_t>();
      table_.emplace(std::make_pair(scene, p.prompt), std::move(p));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::DatasetError, "malformed proposal file " + path.string() + ": " + e.what());
  }
}

MaskProposal ReplayProposer::propose(const Scene&, std::size_t scene_index, PixelPoint prompt, std::uint64_t) const {
  const auto it = table_.find({scene_index, prompt});
  if (it == table_.end()) {
    fail(ErrorKind::DatasetError, "no recorded proposal for scene " + std::to_string(scene_index) + " prompt (" +
                                      std::to_string(prompt.x) + "," + std::to_string(prompt.y) + ")");
  }
  return it->second;
}

MaskProposal RecordingProposer::propose(const Scene& scene, std::size_t scene_index, PixelPoint prompt,
                                        std::uint64_t seed) const {
  MaskProposal p = inner_.propose(scene, scene_index, prompt, seed);
  std::lock_guard lock(mutex_);
  records_.insert_or_assign({scene_index, prompt}, p);
  return p;
}

void RecordingProposer::write(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  json list = json::array();
  for (const auto& [key, p] : records_) list.push_back({{"scene", key.first}, {"proposal", proposal_to_json(p)}});
  write_json_file({{"format", "uoiskit-proposals"}, {"version", 1}, {"proposals", std::move(list)}}, path, -1);
}

}  // namespace uoiskit
