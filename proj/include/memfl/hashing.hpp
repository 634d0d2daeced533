#pragma once

#include <string>
#include <string_view>

namespace memfl {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Incremental SHA-256; feed() may be called any number of times.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void feed(std::string_view data);
  /// Feeds a length prefix then the bytes, so field boundaries are unambiguous.
  void feed_field(std::string_view data);
  std::string hex_digest();

 private:
  void* ctx_;
};

/// Rough token count used when no provider-side counter exists: bytes / 4, rounded up.
inline long long estimate_tokens(std::string_view text) {
  return static_cast<long long>((text.size() + 3) / 4);
}

}  // namespace memfl
