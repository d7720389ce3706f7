#ifndef MICROSTAT_MANIFEST_HPP
#define MICROSTAT_MANIFEST_HPP

// Run manifest written alongside every CLI output: tool version,
// subcommand, argument vector, SHA-256 digests of the inputs, seed and
// timestamps. An output can be regenerated from its manifest plus the
// inputs it names.

#include <array>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "microstat/errors.hpp"
#include "microstat/version.hpp"

namespace microstat {

namespace detail {

// FIPS 180-4 SHA-256.
class Sha256 {
public:
  Sha256() { reset(); }

  void reset() {
    h_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
          0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    buf_len_ = 0;
    total_ = 0;
  }

  void update(const void *data, std::size_t len) {
    const auto *p = static_cast<const std::uint8_t *>(data);
    total_ += len;
    while (len > 0) {
      const std::size_t take = std::min(len, std::size_t{64} - buf_len_);
      std::memcpy(buf_.data() + buf_len_, p, take);
      buf_len_ += take;
      p += take;
      len -= take;
      if (buf_len_ == 64) {
        process(buf_.data());
        buf_len_ = 0;
      }
    }
  }

  std::string hex_digest() {
    const std::uint64_t bits = total_ * 8; // captured before padding
    std::uint8_t pad = 0x80;
    update(&pad, 1);
    const std::uint8_t zero = 0;
    while (buf_len_ != 56) update(&zero, 1);
    std::array<std::uint8_t, 8> lenbytes;
    for (int i = 0; i < 8; ++i)
      lenbytes[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    update(lenbytes.data(), 8);
    std::string out;
    static const char *kHex = "0123456789abcdef";
    for (std::uint32_t w : h_)
      for (int b = 28; b >= 0; b -= 4) out += kHex[(w >> b) & 0xF];
    return out;
  }

private:
  static std::uint32_t rotr(std::uint32_t x, int n) {
    return (x >> n) | (x << (32 - n));
  }

  void process(const std::uint8_t *chunk) {
    static constexpr std::array<std::uint32_t, 64> k = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b,
        0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01,
        0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7,
        0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc,
        0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152,
        0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
        0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
        0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
        0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08,
        0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f,
        0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
        0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
    std::array<std::uint32_t, 64> w;
    for (int i = 0; i < 16; ++i)
      w[static_cast<std::size_t>(i)] =
          (static_cast<std::uint32_t>(chunk[4 * i]) << 24) |
          (static_cast<std::uint32_t>(chunk[4 * i + 1]) << 16) |
          (static_cast<std::uint32_t>(chunk[4 * i + 2]) << 8) |
          static_cast<std::uint32_t>(chunk[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^
                               (w[i - 15] >> 3);
      const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^
                               (w[i - 2] >> 10);
      w[static_cast<std::size_t>(i)] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    auto a = h_[0], b = h_[1], c = h_[2], d = h_[3];
    auto e = h_[4], f = h_[5], g = h_[6], h = h_[7];
    for (int i = 0; i < 64; ++i) {
      const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const std::uint32_t ch = (e & f) ^ (~e & g);
      const std::uint32_t t1 = h + s1 + ch + k[static_cast<std::size_t>(i)] +
                               w[static_cast<std::size_t>(i)];
      const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const std::uint32_t t2 = s0 + maj;
      h = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
    h_[5] += f;
    h_[6] += g;
    h_[7] += h;
  }

  std::array<std::uint32_t, 8> h_;
  std::array<std::uint8_t, 64> buf_;
  std::size_t buf_len_ = 0;
  std::uint64_t total_ = 0;
};

} // namespace detail

inline std::string sha256_hex(const std::string &bytes) {
  detail::Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex_digest();
}

inline std::string sha256_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read '" + path + "' for digesting");
  detail::Sha256 h;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex_digest();
}

struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;
  std::vector<std::pair<std::string, std::string>> inputs; // path, sha256
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string started;
  std::string finished;

  static std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  void add_input(const std::string &path) {
    inputs.emplace_back(path, sha256_file(path));
  }

  // writes <output>.manifest.json next to the output it describes
  void write_for(const std::string &output_path) const {
    nlohmann::json j;
    j["tool"] = "microstat";
    j["version"] = MICROSTAT_VERSION;
    j["digest_algorithm"] = "sha256";
    j["subcommand"] = subcommand;
    j["argv"] = argv;
    nlohmann::json ins = nlohmann::json::array();
    for (const auto &[p, d] : inputs) {
      nlohmann::json e;
      e["path"] = p;
      e["sha256"] = d;
      ins.push_back(std::move(e));
    }
    j["inputs"] = std::move(ins);
    if (has_seed) j["seed"] = seed;
    j["started"] = started;
    j["finished"] = finished;
    j["output"] = output_path;
    std::ofstream out(output_path + ".manifest.json");
    if (!out)
      throw data_error("cannot write manifest for '" + output_path + "'");
    out << j.dump(1) << '\n';
  }
};

} // namespace microstat

#endif
