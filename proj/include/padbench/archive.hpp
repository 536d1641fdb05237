#pragma once

// Single-file parameter archive:
//
//   "PADBENCH"            8-byte magic
//   u32                   archive schema version
//   u64 + bytes           JSON metadata (includes the tensor table)
//   u64 + f64[]           concatenated tensor payload, little endian
//   u64                   FNV-1a over metadata and payload bytes

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "padbench/error.hpp"

namespace padbench {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

inline constexpr char archive_magic[8] = {'P', 'A', 'D', 'B', 'E', 'N', 'C', 'H'};
inline constexpr std::uint32_t archive_schema_version = 1;

struct Archive {
  nlohmann::json meta;
  std::vector<std::pair<std::string, std::vector<double>>> tensors;

  const std::vector<double>& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    throw format_error("archive has no tensor '" + name + "'");
  }
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw format_error("truncated archive (" + what + ")");
  return v;
}

}  // namespace detail

inline void write_archive(const std::filesystem::path& path, const Archive& a) {
  nlohmann::json meta = a.meta;
  auto& table = meta["tensors"] = nlohmann::json::array();
  std::vector<double> payload;
  for (const auto& [name, t] : a.tensors) {
    table.push_back({{"name", name}, {"size", t.size()}});
    payload.insert(payload.end(), t.begin(), t.end());
  }
  const std::string meta_text = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out.write(archive_magic, sizeof archive_magic);
  detail::write_pod(out, archive_schema_version);
  detail::write_pod(out, static_cast<std::uint64_t>(meta_text.size()));
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  detail::write_pod(out, static_cast<std::uint64_t>(payload.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 8));
  auto h = detail::fnv1a(meta_text.data(), meta_text.size());
  h = detail::fnv1a(payload.data(), payload.size() * 8, h);
  detail::write_pod(out, h);
  if (!out) throw io_error("failed writing '" + path.string() + "'");
}

inline Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read '" + path.string() + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, archive_magic, 8) != 0)
    throw format_error("'" + path.string() + "' is not a padbench archive");
  const auto version = detail::read_pod<std::uint32_t>(in, "version");
  if (version != archive_schema_version)
    throw format_error("unsupported archive schema_version " + std::to_string(version));
  const auto meta_len = detail::read_pod<std::uint64_t>(in, "metadata length");
  if (meta_len > (1ULL << 30)) throw format_error("implausible metadata length");
  std::string meta_text(meta_len, '\0');
  if (!in.read(meta_text.data(), static_cast<std::streamsize>(meta_len))) throw format_error("truncated metadata");
  const auto count = detail::read_pod<std::uint64_t>(in, "payload length");
  if (count > (1ULL << 32)) throw format_error("implausible payload length");
  std::vector<double> payload(count);
  if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(count * 8)))
    throw format_error("truncated payload");
  const auto stored = detail::read_pod<std::uint64_t>(in, "checksum");
  auto h = detail::fnv1a(meta_text.data(), meta_text.size());
  h = detail::fnv1a(payload.data(), payload.size() * 8, h);
  if (h != stored) throw format_error("checksum mismatch in '" + path.string() + "'");

  Archive a;
  try {
    a.meta = nlohmann::json::parse(meta_text);
    std::size_t offset = 0;
    for (const auto& entry : a.meta.at("tensors")) {
      const auto size = entry.at("size").get<std::size_t>();
      if (offset + size > payload.size()) throw format_error("tensor table exceeds payload");
      a.tensors.emplace_back(entry.at("name").get<std::string>(),
                             std::vector<double>(payload.begin() + static_cast<long>(offset),
                                                 payload.begin() + static_cast<long>(offset + size)));
      offset += size;
    }
    if (offset != payload.size()) throw format_error("payload has trailing values");
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("malformed archive metadata: ") + e.what());
  }
  return a;
}

}  // namespace padbench
