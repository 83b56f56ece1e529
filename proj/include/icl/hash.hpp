#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace icl {

// Hex-encoded SHA-256 digest. Used for embedding-cache keys and prompt
// content hashes, so the encoding must never change.
std::string sha256_hex(std::string_view data);

// 64-bit FNV-1a over a base seed plus a list of string parts. Stable across
// platforms; used to derive per-draw seeds from a run seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> parts);

}  // namespace icl
