#include "svp/descriptor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "svp/errors.hpp"

namespace svp {
namespace {

constexpr char kTokenMagic[4] = {'S', 'V', 'G', 'T'};
constexpr char kDescriptorMagic[4] = {'S', 'V', 'G', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in, const char* field) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw format_error(std::string("truncated header while reading ") + field);
  }
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint8_t get_u8(std::istream& in, const char* field) {
  char b;
  if (!in.read(&b, 1)) {
    throw format_error(std::string("truncated header while reading ") + field);
  }
  return static_cast<std::uint8_t>(b);
}

void write_payload(std::ostream& out, const std::vector<float>& data) {
  std::vector<char> buf(data.size() * 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(data[i]);
    buf[i * 4 + 0] = static_cast<char>(bits & 0xff);
    buf[i * 4 + 1] = static_cast<char>((bits >> 8) & 0xff);
    buf[i * 4 + 2] = static_cast<char>((bits >> 16) & 0xff);
    buf[i * 4 + 3] = static_cast<char>((bits >> 24) & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<float> read_payload(std::istream& in, std::uint64_t count,
                                const std::string& path) {
  // Size check before allocating so a corrupt header cannot demand
  // terabytes.
  std::istream::pos_type body = in.tellg();
  in.seekg(0, std::ios::end);
  std::uint64_t available =
      static_cast<std::uint64_t>(in.tellg() - body);
  in.seekg(body);
  if (available < count * 4) {
    std::ostringstream msg;
    msg << path << ": truncated payload, expected " << count
        << " f32 values (" << count * 4 << " bytes) but found " << available;
    throw format_error(msg.str());
  }
  if (available > count * 4) {
    throw format_error(path + ": trailing bytes after payload");
  }
  std::vector<char> buf(count * 4);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != count * 4) {
    throw format_error(path + ": payload read failed");
  }
  std::vector<float> data(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const unsigned char* p =
        reinterpret_cast<const unsigned char*>(buf.data()) + i * 4;
    std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                         (static_cast<std::uint32_t>(p[1]) << 8) |
                         (static_cast<std::uint32_t>(p[2]) << 16) |
                         (static_cast<std::uint32_t>(p[3]) << 24);
    data[i] = std::bit_cast<float>(bits);
  }
  return data;
}

void check_magic(std::istream& in, const char (&magic)[4],
                 const std::string& path) {
  char got[4];
  if (!in.read(got, 4)) {
    throw format_error(path + ": file too short for magic bytes");
  }
  if (std::memcmp(got, magic, 4) != 0) {
    throw format_error(path + ": bad magic, expected \"" +
                       std::string(magic, 4) + "\"");
  }
}

// Multiplies dimensions in 128-bit so corrupt headers cannot wrap the
// 2^40 element guard.
std::uint64_t checked_elements(std::initializer_list<std::uint32_t> dims,
                               const std::string& path) {
  unsigned __int128 product = 1;
  for (std::uint32_t d : dims) {
    if (d == 0) {
      throw format_error(path + ": zero-sized dimension in header");
    }
    product *= d;
  }
  if (product > kMaxElements) {
    throw format_error(path + ": dimension overflow, header implies more "
                       "than 2^40 elements");
  }
  return static_cast<std::uint64_t>(product);
}

void check_header_common(std::uint32_t version, std::uint8_t dtype,
                         const std::string& path) {
  if (version != kVersion) {
    throw format_error(path + ": unsupported version " +
                       std::to_string(version));
  }
  if (dtype != kDtypeF32) {
    throw format_error(path + ": unsupported dtype " + std::to_string(dtype) +
                       ", only f32 (0) is defined");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open " + path);
  return in;
}

}  // namespace

DescriptorSet pool_descriptors(const TokenStack& stack) {
  const std::uint64_t n = stack.num_frames;
  const std::uint64_t p = stack.tokens_per_frame;
  const std::uint64_t c = stack.channels;
  if (n == 0 || p == 0 || c == 0 || stack.data.size() != n * p * c) {
    throw data_error("token stack dimensions do not match its payload");
  }
  DescriptorSet set;
  set.num_frames = stack.num_frames;
  set.channels = stack.channels;
  set.descriptors.resize(n * c);
  std::vector<double> acc(c);
  for (std::uint64_t s = 0; s < n; ++s) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const float* frame = stack.data.data() + s * p * c;
    for (std::uint64_t t = 0; t < p; ++t) {
      for (std::uint64_t ch = 0; ch < c; ++ch) {
        float v = frame[t * c + ch];
        if (!std::isfinite(v)) {
          throw data_error("non-finite token value at frame " +
                           std::to_string(s) + ", token " + std::to_string(t) +
                           ", channel " + std::to_string(ch));
        }
        acc[ch] += v;
      }
    }
    for (std::uint64_t ch = 0; ch < c; ++ch) {
      set.descriptors[s * c + ch] =
          static_cast<float>(acc[ch] / static_cast<double>(p));
    }
  }
  return set;
}

TokenStack load_tokens(const std::string& path) {
  std::ifstream in = open_in(path);
  check_magic(in, kTokenMagic, path);
  std::uint32_t version = get_u32(in, "version");
  TokenStack stack;
  stack.num_frames = get_u32(in, "N");
  stack.tokens_per_frame = get_u32(in, "P");
  stack.channels = get_u32(in, "C");
  std::uint8_t dtype = get_u8(in, "dtype");
  check_header_common(version, dtype, path);
  std::uint64_t elements = checked_elements(
      {stack.num_frames, stack.tokens_per_frame, stack.channels}, path);
  stack.data = read_payload(in, elements, path);
  return stack;
}

void save_tokens(const TokenStack& stack, const std::string& path) {
  std::uint64_t elements = checked_elements(
      {stack.num_frames, stack.tokens_per_frame, stack.channels}, path);
  if (stack.data.size() != elements) {
    throw data_error("token stack dimensions do not match its payload");
  }
  std::ofstream out = open_out(path);
  out.write(kTokenMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, stack.num_frames);
  put_u32(out, stack.tokens_per_frame);
  put_u32(out, stack.channels);
  out.put(static_cast<char>(kDtypeF32));
  write_payload(out, stack.data);
  if (!out) throw format_error("write failed for " + path);
}

DescriptorSet load_descriptors(const std::string& path) {
  std::ifstream in = open_in(path);
  check_magic(in, kDescriptorMagic, path);
  std::uint32_t version = get_u32(in, "version");
  DescriptorSet set;
  set.num_frames = get_u32(in, "N");
  set.channels = get_u32(in, "C");
  std::uint8_t dtype = get_u8(in, "dtype");
  check_header_common(version, dtype, path);
  std::uint64_t elements =
      checked_elements({set.num_frames, set.channels}, path);
  set.descriptors = read_payload(in, elements, path);
  return set;
}

void save_descriptors(const DescriptorSet& set, const std::string& path) {
  std::uint64_t elements =
      checked_elements({set.num_frames, set.channels}, path);
  if (set.descriptors.size() != elements) {
    throw data_error("descriptor set dimensions do not match its payload");
  }
  std::ofstream out = open_out(path);
  out.write(kDescriptorMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, set.num_frames);
  put_u32(out, set.channels);
  out.put(static_cast<char>(kDtypeF32));
  write_payload(out, set.descriptors);
  if (!out) throw format_error("write failed for " + path);
}

DescriptorFileKind detect_file_kind(const std::string& path) {
  std::ifstream in = open_in(path);
  char magic[4];
  if (!in.read(magic, 4)) {
    throw format_error(path + ": file too short for magic bytes");
  }
  if (std::memcmp(magic, kTokenMagic, 4) == 0) {
    return DescriptorFileKind::tokens;
  }
  if (std::memcmp(magic, kDescriptorMagic, 4) == 0) {
    return DescriptorFileKind::descriptors;
  }
  throw format_error(path + ": unrecognized magic, expected SVGT or SVGD");
}

}  // namespace svp
