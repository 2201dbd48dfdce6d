#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stsearch/binary_io.hpp"
#include "stsearch/error.hpp"

namespace stsearch {

// Row-major float matrix with one item id per row.
struct EmbeddingTable {
  std::uint16_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> values;  // ids.size() * dim

  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
};

inline constexpr char kEmbeddingMagic[4] = {'S', 'T', 'C', 'H'};
inline constexpr std::uint16_t kEmbeddingVersion = 1;

inline std::filesystem::path embedding_ids_path(const std::filesystem::path& bin) {
  auto p = bin;
  p += ".ids";
  return p;
}

// Layout: "STCH", u16 version, u64 count, u16 dim, count*dim f32 LE.
// Ids go to a sidecar text file "<path>.ids", one per line in row order.
inline void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& t) {
  if (t.values.size() != t.ids.size() * t.dim)
    fail(ErrorKind::kUsage, "embedding table shape mismatch");
  io::ByteWriter w;
  w.put_bytes({kEmbeddingMagic, 4});
  w.put<std::uint16_t>(kEmbeddingVersion);
  w.put<std::uint64_t>(t.ids.size());
  w.put<std::uint16_t>(t.dim);
  w.put_floats(t.values);
  io::write_file_atomic(path, w.bytes());

  std::ofstream ids(embedding_ids_path(path), std::ios::trunc);
  if (!ids) fail(ErrorKind::kData, "cannot write id sidecar for " + path.string());
  for (const auto& id : t.ids) ids << id << '\n';
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes);
  if (r.remaining() < 4 || r.get_bytes(4) != std::string(kEmbeddingMagic, 4))
    fail(ErrorKind::kFormat, path.string() + " is not an embedding file");
  if (r.get<std::uint16_t>() != kEmbeddingVersion)
    fail(ErrorKind::kFormat, "unsupported embedding file version");
  const auto count = r.get<std::uint64_t>();
  EmbeddingTable t;
  t.dim = r.get<std::uint16_t>();
  if (t.dim != 0 && count > r.remaining() / (4u * t.dim))
    fail(ErrorKind::kTruncated, path.string() + " is truncated");
  t.values.resize(count * t.dim);
  r.get_floats(t.values);

  std::ifstream ids(embedding_ids_path(path));
  if (!ids) fail(ErrorKind::kData, "missing id sidecar for " + path.string());
  for (std::string line; std::getline(ids, line);)
    if (!line.empty()) t.ids.push_back(line);
  if (t.ids.size() != count)
    fail(ErrorKind::kData, "id sidecar row count does not match " + path.string());
  return t;
}

}  // namespace stsearch
