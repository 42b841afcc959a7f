#include "fmala/chain_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace fmala {

static_assert(std::endian::native == std::endian::little,
              "chain files are written little-endian");

namespace {

constexpr char kMagic[7] = {'F', 'M', 'C', 'H', 'A', 'I', 'N'};
constexpr std::uint8_t kVersion = 1;

struct RawHeader {
  char magic[7];
  std::uint8_t version;
  std::uint8_t kind;
  std::uint8_t pad[7];
  std::uint64_t dim;
  std::uint64_t total;
  std::uint64_t init_phase;
  std::uint64_t warmup;
  std::uint64_t burn_in;
  std::uint64_t collection;
  std::uint64_t seed;
  std::uint64_t config_hash;
  std::uint64_t nan_rejections;
};
static_assert(sizeof(RawHeader) == 88);

RawHeader make_header(const ChainRecord& rec, std::uint64_t config_hash) {
  RawHeader h{};
  std::memcpy(h.magic, kMagic, sizeof(kMagic));
  h.version = kVersion;
  h.kind = static_cast<std::uint8_t>(rec.kind);
  h.dim = static_cast<std::uint64_t>(rec.dim());
  h.total = static_cast<std::uint64_t>(rec.total());
  h.init_phase = static_cast<std::uint64_t>(rec.init_phase);
  h.warmup = static_cast<std::uint64_t>(rec.warmup);
  h.burn_in = static_cast<std::uint64_t>(rec.burn_in);
  h.collection = static_cast<std::uint64_t>(rec.collection);
  h.seed = rec.seed;
  h.config_hash = config_hash;
  h.nan_rejections = static_cast<std::uint64_t>(rec.nan_rejections);
  return h;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = seed;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64(const std::string& text) { return fnv1a64(text.data(), text.size()); }

std::uint64_t chain_digest(const ChainRecord& rec) {
  const RawHeader header = make_header(rec, 0);
  std::uint64_t hash = fnv1a64(&header, sizeof(header));
  hash = fnv1a64(rec.step_trace.data(), rec.step_trace.size() * sizeof(double), hash);
  hash = fnv1a64(rec.accepted.data(), rec.accepted.size(), hash);
  hash = fnv1a64(rec.samples.data(), static_cast<std::size_t>(rec.samples.size()) * sizeof(double),
                 hash);
  return hash;
}

void write_chain(const std::filesystem::path& path, const ChainRecord& rec,
                 std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_chain: cannot open " + path.string());
  const RawHeader header = make_header(rec, config_hash);
  out.write(reinterpret_cast<const char*>(&header), sizeof(header));
  out.write(reinterpret_cast<const char*>(rec.step_trace.data()),
            static_cast<std::streamsize>(rec.step_trace.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(rec.accepted.data()),
            static_cast<std::streamsize>(rec.accepted.size()));
  // Column-major storage: one contiguous run per dimension.
  out.write(reinterpret_cast<const char*>(rec.samples.data()),
            static_cast<std::streamsize>(static_cast<std::size_t>(rec.samples.size()) *
                                         sizeof(double)));
  out.write(reinterpret_cast<const char*>(rec.seconds.data()),
            static_cast<std::streamsize>(rec.seconds.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_chain: short write to " + path.string());
}

LoadedChain read_chain(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_chain: cannot open " + path.string());
  RawHeader header{};
  in.read(reinterpret_cast<char*>(&header), sizeof(header));
  if (!in || std::memcmp(header.magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("read_chain: not a chain file: " + path.string());
  }
  if (header.version != kVersion) {
    throw std::runtime_error("read_chain: unsupported version in " + path.string());
  }
  LoadedChain loaded;
  loaded.config_hash = header.config_hash;
  ChainRecord& rec = loaded.record;
  rec.kind = static_cast<SamplerKind>(header.kind);
  rec.init_phase = static_cast<long>(header.init_phase);
  rec.warmup = static_cast<long>(header.warmup);
  rec.burn_in = static_cast<long>(header.burn_in);
  rec.collection = static_cast<long>(header.collection);
  rec.seed = header.seed;
  rec.nan_rejections = static_cast<long>(header.nan_rejections);
  const auto total = static_cast<Eigen::Index>(header.total);
  const auto dim = static_cast<Eigen::Index>(header.dim);
  rec.step_trace.resize(header.total);
  rec.accepted.resize(header.total);
  rec.samples.resize(total, dim);
  rec.seconds.resize(header.total);
  in.read(reinterpret_cast<char*>(rec.step_trace.data()),
          static_cast<std::streamsize>(rec.step_trace.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(rec.accepted.data()),
          static_cast<std::streamsize>(rec.accepted.size()));
  in.read(reinterpret_cast<char*>(rec.samples.data()),
          static_cast<std::streamsize>(static_cast<std::size_t>(rec.samples.size()) *
                                       sizeof(double)));
  in.read(reinterpret_cast<char*>(rec.seconds.data()),
          static_cast<std::streamsize>(rec.seconds.size() * sizeof(double)));
  if (!in) throw std::runtime_error("read_chain: truncated file: " + path.string());
  return loaded;
}

}  // namespace fmala
