#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace cotkit {

/// Incremental SHA-256 (OpenSSL EVP) with lowercase hex output.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  std::string hex_digest();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace cotkit
