#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <doctest.h>

#include "svp/descriptor_io.hpp"
#include "svp/errors.hpp"
#include "svp/rng.hpp"
#include "test_util.hpp"

using namespace svp;

namespace {

TokenStack random_stack(std::uint32_t n, std::uint32_t p, std::uint32_t c,
                        Rng& rng) {
  TokenStack stack;
  stack.num_frames = n;
  stack.tokens_per_frame = p;
  stack.channels = c;
  stack.data.resize(static_cast<std::size_t>(n) * p * c);
  for (float& v : stack.data) {
    v = static_cast<float>(rng.next_uniform(-4.0, 4.0));
  }
  return stack;
}

// Independent pooling oracle: plain elementwise mean with 64-bit sums.
std::vector<double> mean_oracle(const TokenStack& stack) {
  std::vector<double> out(static_cast<std::size_t>(stack.num_frames) *
                          stack.channels);
  for (std::uint32_t s = 0; s < stack.num_frames; ++s) {
    for (std::uint32_t ch = 0; ch < stack.channels; ++ch) {
      double sum = 0.0;
      for (std::uint32_t t = 0; t < stack.tokens_per_frame; ++t) {
        sum += stack.data[(static_cast<std::size_t>(s) *
                               stack.tokens_per_frame +
                           t) *
                              stack.channels +
                          ch];
      }
      out[static_cast<std::size_t>(s) * stack.channels + ch] =
          sum / stack.tokens_per_frame;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("pooling averages patch tokens") {
  TokenStack stack;
  stack.num_frames = 1;
  stack.tokens_per_frame = 2;
  stack.channels = 2;
  stack.data = {1.0f, 0.0f, 0.0f, 1.0f};
  DescriptorSet set = pool_descriptors(stack);
  CHECK(set.num_frames == 1);
  CHECK(set.channels == 2);
  CHECK(set.descriptors[0] == 0.5f);
  CHECK(set.descriptors[1] == 0.5f);
}

TEST_CASE("pooling with a single token per frame is the identity") {
  TokenStack stack;
  stack.num_frames = 2;
  stack.tokens_per_frame = 1;
  stack.channels = 3;
  stack.data = {1.5f, -2.0f, 0.25f, 3.0f, 0.0f, -1.0f};
  DescriptorSet set = pool_descriptors(stack);
  CHECK(std::memcmp(set.descriptors.data(), stack.data.data(),
                    stack.data.size() * sizeof(float)) == 0);
}

TEST_CASE("pooling matches the 64-bit mean oracle") {
  Rng rng(101);
  TokenStack stack = random_stack(3, 4, 8, rng);
  DescriptorSet set = pool_descriptors(stack);
  std::vector<double> expected = mean_oracle(stack);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    double rel = std::abs(set.descriptors[i] - expected[i]) /
                 std::max(1e-30, std::abs(expected[i]));
    CHECK(rel <= 1e-6);
  }
}

TEST_CASE("pooling is exact for constant tokens") {
  TokenStack stack;
  stack.num_frames = 2;
  stack.tokens_per_frame = 7;
  stack.channels = 3;
  const float v[3] = {0.123f, -9.75f, 3.0e-5f};
  stack.data.resize(2 * 7 * 3);
  for (std::uint32_t s = 0; s < 2; ++s) {
    for (std::uint32_t t = 0; t < 7; ++t) {
      for (std::uint32_t ch = 0; ch < 3; ++ch) {
        stack.data[(s * 7 + t) * 3 + ch] = v[ch];
      }
    }
  }
  DescriptorSet set = pool_descriptors(stack);
  for (std::uint32_t s = 0; s < 2; ++s) {
    for (std::uint32_t ch = 0; ch < 3; ++ch) {
      CHECK(std::abs(set.descriptors[s * 3 + ch] - v[ch]) <= 1e-7);
    }
  }
}

TEST_CASE("pooling commutes with frame permutation") {
  Rng rng(77);
  TokenStack stack = random_stack(5, 3, 4, rng);
  DescriptorSet direct = pool_descriptors(stack);

  const std::uint32_t perm[5] = {3, 0, 4, 1, 2};
  TokenStack permuted = stack;
  for (std::uint32_t s = 0; s < 5; ++s) {
    std::memcpy(permuted.data.data() + static_cast<std::size_t>(s) * 3 * 4,
                stack.data.data() + static_cast<std::size_t>(perm[s]) * 3 * 4,
                3 * 4 * sizeof(float));
  }
  DescriptorSet pooled = pool_descriptors(permuted);
  for (std::uint32_t s = 0; s < 5; ++s) {
    CHECK(std::memcmp(pooled.descriptors.data() + s * 4,
                      direct.descriptors.data() + perm[s] * 4,
                      4 * sizeof(float)) == 0);
  }
}

TEST_CASE("pooling rejects non-finite tokens") {
  TokenStack stack;
  stack.num_frames = 1;
  stack.tokens_per_frame = 2;
  stack.channels = 2;
  stack.data = {1.0f, 0.0f, std::numeric_limits<float>::quiet_NaN(), 1.0f};
  CHECK_THROWS_AS(pool_descriptors(stack), data_error);
  stack.data[2] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(pool_descriptors(stack), data_error);
}

TEST_CASE("token and descriptor files round-trip bit-exactly") {
  Rng rng(2024);
  for (int round = 0; round < 8; ++round) {
    std::uint32_t n = 1 + static_cast<std::uint32_t>(rng.next_below(6));
    std::uint32_t p = 1 + static_cast<std::uint32_t>(rng.next_below(5));
    std::uint32_t c = 1 + static_cast<std::uint32_t>(rng.next_below(9));
    TokenStack stack = random_stack(n, p, c, rng);
    std::string path = test::artifact_path("roundtrip.svgt");
    save_tokens(stack, path);
    TokenStack loaded = load_tokens(path);
    REQUIRE(loaded.num_frames == n);
    REQUIRE(loaded.tokens_per_frame == p);
    REQUIRE(loaded.channels == c);
    CHECK(std::memcmp(loaded.data.data(), stack.data.data(),
                      stack.data.size() * sizeof(float)) == 0);

    DescriptorSet set = pool_descriptors(stack);
    std::string dpath = test::artifact_path("roundtrip.svgd");
    save_descriptors(set, dpath);
    DescriptorSet dloaded = load_descriptors(dpath);
    REQUIRE(dloaded.num_frames == n);
    REQUIRE(dloaded.channels == c);
    CHECK(std::memcmp(dloaded.descriptors.data(), set.descriptors.data(),
                      set.descriptors.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("truncated payload is reported") {
  // Header says N=2, P=3, C=4 (24 floats) but only 23 are present.
  std::string path = test::artifact_path("truncated.svgt");
  {
    TokenStack stack;
    stack.num_frames = 2;
    stack.tokens_per_frame = 3;
    stack.channels = 4;
    stack.data.assign(24, 1.0f);
    save_tokens(stack, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
  }
  CHECK_THROWS_WITH_AS(load_tokens(path),
                       doctest::Contains("truncated payload"), format_error);
}

TEST_CASE("wrong magic is reported") {
  std::string path = test::artifact_path("magic.svgt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE" << std::string(64, '\0');
  }
  CHECK_THROWS_WITH_AS(load_tokens(path), doctest::Contains("bad magic"),
                       format_error);
  CHECK_THROWS_AS(load_descriptors(path), format_error);
  CHECK_THROWS_AS(detect_file_kind(path), format_error);
}

TEST_CASE("dimension overflow in a corrupt header is caught") {
  std::string path = test::artifact_path("overflow.svgt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "SVGT";
    auto put = [&](std::uint32_t v) {
      char b[4] = {static_cast<char>(v & 0xff),
                   static_cast<char>((v >> 8) & 0xff),
                   static_cast<char>((v >> 16) & 0xff),
                   static_cast<char>((v >> 24) & 0xff)};
      out.write(b, 4);
    };
    put(1);           // version
    put(0xffffffffu); // N
    put(0xffffffffu); // P
    put(2);           // C
    out.put('\0');    // dtype
  }
  CHECK_THROWS_WITH_AS(load_tokens(path),
                       doctest::Contains("dimension overflow"), format_error);
}

TEST_CASE("file kinds are detected from magic bytes") {
  Rng rng(5);
  TokenStack stack = random_stack(2, 2, 2, rng);
  std::string tpath = test::artifact_path("kind.svgt");
  save_tokens(stack, tpath);
  CHECK(detect_file_kind(tpath) == DescriptorFileKind::tokens);

  DescriptorSet set = pool_descriptors(stack);
  std::string dpath = test::artifact_path("kind.svgd");
  save_descriptors(set, dpath);
  CHECK(detect_file_kind(dpath) == DescriptorFileKind::descriptors);
}
