#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fmala/samplers.hpp"

namespace fmala {

/// FNV-1a over a byte range.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& text);

/// Digest of the reproducible chain payload: header fields, step trace,
/// acceptance flags and samples. Wall-clock times are excluded on purpose;
/// they cannot reproduce across reruns.
std::uint64_t chain_digest(const ChainRecord& record);

/// Columnar binary chain file, magic "FMCHAIN" + version byte, little-endian.
/// Layout: header, step trace, acceptance flags, one contiguous column per
/// dimension, then the wall-clock section. Preconditioner snapshots are run
/// artifacts and are not persisted here.
void write_chain(const std::filesystem::path& path, const ChainRecord& record,
                 std::uint64_t config_hash);

struct LoadedChain {
  ChainRecord record;
  std::uint64_t config_hash = 0;
};

LoadedChain read_chain(const std::filesystem::path& path);

}  // namespace fmala
