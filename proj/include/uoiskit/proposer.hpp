#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uoiskit/mask.hpp"
#include "uoiskit/synthgen.hpp"

namespace uoiskit {

/// Hierarchy slot order of a proposal.
enum class Slot : int { Default = 0, Whole = 1, Part = 2, Subpart = 3 };

inline constexpr int kSlotCount = 4;
/// Slot tag used when synthesising the IoU token.
inline constexpr int kIouTokenSlot = 4;
/// Leading token components that carry mask statistics; the rest is noise.
inline constexpr int kTokenStatCount = 12;

/// Four candidate masks for one point prompt plus the segmenter's own quality
/// scores and its IoU / mask tokens.
struct MaskProposal {
  PixelPoint prompt;
  std::array<BinaryMask, kSlotCount> masks;
  std::array<double, kSlotCount> base_scores{};
  std::vector<double> iou_token;
  std::array<std::vector<double>, kSlotCount> mask_tokens;

  friend bool operator==(const MaskProposal&, const MaskProposal&) = default;
};

struct OracleConfig {
  /// Score inflation applied to the whole slot.
  double whole_bias = 0.3;
  /// Maximum per-sector dilate/erode radius of the boundary noise, in pixels.
  int boundary_noise = 1;
  /// Number of angular sectors around the centroid that receive independent noise.
  int noise_sectors = 8;
  double score_noise = 0.005;
  double token_noise = 0.01;
  int channels = 256;
  /// Dilation radius of an isolated instance's whole mask, relative to its
  /// equivalent-disk radius.
  double whole_dilation = 0.25;
  /// Instances within this many pixels count as touching.
  int neighbor_gap = 2;

  void validate() const;
};

nlohmann::json to_json(const OracleConfig& cfg);
OracleConfig oracle_config_from_json(const nlohmann::json& j);

/// Synthetic stand-in for a promptable segmenter's decoder.
///
/// On an instance I: part is I with boundary noise, default re-noises part,
/// subpart is the connected piece of I on the prompt's side of a random line
/// through I's centroid, and whole merges I with a touching neighbour (or
/// dilates I when it has none). On background: four background blobs placed
/// around the prompt. Scores are true IoU (or a clutter-confusion draw in
/// [0.3, 0.9] for background) plus the whole bias and Gaussian noise, clamped
/// to [0, 1]. Throws InvalidPrompt for an out-of-bounds prompt.
MaskProposal propose(const Scene& scene, PixelPoint prompt, const OracleConfig& cfg, std::uint64_t seed);

/// Token layout: [0] area fraction, [1] sqrt(area fraction), [2] boundary
/// pixels / area, [3..4] (centroid - prompt) / (w, h), [5..9] one-hot of the
/// slot (4 = IoU token), [10] base score, [11] contains-prompt flag, then
/// seeded Gaussian noise up to cfg.channels.
std::vector<double> synth_tokens(const BinaryMask& mask, PixelPoint prompt, double base_score, int slot,
                                 const OracleConfig& cfg, std::uint64_t seed);

/// IoU of each slot against the instance under the prompt (0 on background).
std::array<double, kSlotCount> true_ious(const MaskProposal& proposal, const Scene& scene);

/// Interface over a promptable segmenter; implementations must be pure given
/// (scene, scene_index, prompt, seed).
class MaskProposer {
 public:
  virtual ~MaskProposer() = default;
  virtual std::string name() const = 0;
  virtual MaskProposal propose(const Scene& scene, std::size_t scene_index, PixelPoint prompt,
                               std::uint64_t seed) const = 0;
};

class OracleProposer final : public MaskProposer {
 public:
  explicit OracleProposer(OracleConfig cfg);
  std::string name() const override { return "oracle"; }
  MaskProposal propose(const Scene& scene, std::size_t scene_index, PixelPoint prompt,
                       std::uint64_t seed) const override;
  const OracleConfig& config() const noexcept { return cfg_; }

 private:
  OracleConfig cfg_;
};

nlohmann::json proposal_to_json(const MaskProposal& p);
MaskProposal proposal_from_json(const nlohmann::json& j);

/// Serves proposals recorded by a RecordingProposer, keyed by scene index and
/// prompt. An unrecorded lookup throws DatasetError.
class ReplayProposer final : public MaskProposer {
 public:
  explicit ReplayProposer(const std::filesystem::path& path);
  std::string name() const override { return "replay"; }
  MaskProposal propose(const Scene& scene, std::size_t scene_index, PixelPoint prompt,
                       std::uint64_t seed) const override;
  std::size_t size() const noexcept { return table_.size(); }

 private:
  std::map<std::pair<std::size_t, PixelPoint>, MaskProposal> table_;
};

/// Forwards to another proposer and keeps every proposal it returned.
class RecordingProposer final : public MaskProposer {
 public:
  explicit RecordingProposer(const MaskProposer& inner) : inner_(inner) {}
  std::string name() const override { return inner_.name(); }
  MaskProposal propose(const Scene& scene, std::size_t scene_index, PixelPoint prompt,
                       std::uint64_t seed) const override;
  /// Records sorted by (scene, prompt) so the file is independent of call order.
  void write(const std::filesystem::path& path) const;

 private:
  const MaskProposer& inner_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::size_t, PixelPoint>, MaskProposal> records_;
};

}  // namespace uoiskit
