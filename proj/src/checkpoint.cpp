#include "acdc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace acdc::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

namespace {

constexpr char kMagic[8] = {'A', 'C', 'D', 'C', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return value;
}

std::string read_string(std::istream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  if (len > (1u << 20)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

const NamedMatrix* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const std::map<std::string, std::string>& meta,
                     const ParamList& blocks) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    write_string(out, k);
    write_string(out, v);
  }
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    write_string(out, b.name);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(b.rows));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(b.cols));
    out.write(reinterpret_cast<const char*>(b.data),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(b.size())));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto n_meta = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto key = read_string(in);
    ck.meta[key] = read_string(in);
  }
  const auto n_blocks = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    NamedMatrix nm;
    nm.name = read_string(in);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    if (rows * cols > (1ull << 28)) throw std::runtime_error("checkpoint: implausible block size");
    nm.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(nm.value.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw std::runtime_error("checkpoint: truncated block " + nm.name);
    ck.blocks.push_back(std::move(nm));
  }
  return ck;
}

void restore_blocks(const Checkpoint& checkpoint, const ParamList& targets) {
  for (const auto& t : targets) {
    const auto* src = checkpoint.find(t.name);
    if (src == nullptr) throw std::runtime_error("checkpoint: missing block " + t.name);
    if (src->value.rows() != t.rows || src->value.cols() != t.cols) {
      throw std::runtime_error("checkpoint: shape mismatch for block " + t.name);
    }
    t.map() = src->value;
  }
}

}  // namespace acdc::nn
