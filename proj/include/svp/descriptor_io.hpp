#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace svp {

// Binary formats (all integers little-endian, payload little-endian f32):
//
//   SVGT token file:       magic "SVGT", u32 version=1, u32 N, u32 P, u32 C,
//                          u8 dtype (0 = f32), then N*P*C floats in
//                          frame-major, token-major, channel-minor order.
//   SVGD descriptor file:  magic "SVGD", u32 version=1, u32 N, u32 C,
//                          u8 dtype (0 = f32), then N*C floats row-major.
//
// Headers are validated strictly; a corrupt dimension triggers the 2^40
// element guard instead of an allocation attempt.

inline constexpr std::uint64_t kMaxElements = 1ull << 40;

// N frames of P patch tokens, C channels each. Register/camera tokens are
// not part of this container; only patch tokens are ever pooled.
struct TokenStack {
  std::uint32_t num_frames = 0;
  std::uint32_t tokens_per_frame = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;  // num_frames * tokens_per_frame * channels

  std::uint64_t element_count() const {
    return static_cast<std::uint64_t>(num_frames) * tokens_per_frame *
           channels;
  }
};

struct DescriptorSet {
  std::uint32_t num_frames = 0;
  std::uint32_t channels = 0;
  std::vector<float> descriptors;  // num_frames * channels, row-major

  const float* row(std::uint32_t frame) const {
    return descriptors.data() +
           static_cast<std::size_t>(frame) * channels;
  }
};

// Mean of each frame's patch tokens, accumulated in 64-bit.
// Throws data_error if any token value is non-finite.
DescriptorSet pool_descriptors(const TokenStack& stack);

TokenStack load_tokens(const std::string& path);
void save_tokens(const TokenStack& stack, const std::string& path);

DescriptorSet load_descriptors(const std::string& path);
void save_descriptors(const DescriptorSet& set, const std::string& path);

enum class DescriptorFileKind { tokens, descriptors };

// Sniffs the magic bytes. Throws format_error for anything else.
DescriptorFileKind detect_file_kind(const std::string& path);

}  // namespace svp
