#include "ccgen/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace ccgen::nn {

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'C', 'F', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') return false;
  }
  return true;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ParamStore<float>& params, const std::map<std::string, std::string>& meta) {
  std::ostringstream manifest;
  manifest << "version " << kCheckpointVersion << '\n';
  for (const auto& [k, v] : meta) {
    if (!valid_token(k) || v.find('\n') != std::string::npos) {
      throw ValidationError("checkpoint: unsupported meta entry '" + k + "'");
    }
    manifest << "meta " << k << ' ' << v << '\n';
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i];
    if (!valid_token(params.name(i))) throw ValidationError("checkpoint: bad tensor name '" + params.name(i) + "'");
    manifest << "tensor " << params.name(i) << " f32 " << offset << ' ' << t.shape.size();
    for (auto d : t.shape) manifest << ' ' << d;
    manifest << '\n';
    offset += t.size() * 4;
  }
  const std::string text = manifest.str();
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  std::vector<char> buf;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i];
    buf.resize(t.size() * 4);
    for (std::size_t j = 0; j < t.size(); ++j) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(t.raw()[j]);
      for (int b = 0; b < 4; ++b) buf[j * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params,
                     const std::map<std::string, std::string>& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  save_checkpoint(out, params, meta);
}

Checkpoint load_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  unsigned char len_bytes[4];
  if (!in.read(magic.data(), 4) || magic != kMagic) throw FormatError("checkpoint: bad magic");
  if (!in.read(reinterpret_cast<char*>(len_bytes), 4)) throw FormatError("checkpoint: corrupt manifest (no length)");
  const std::uint32_t len = get_u32(len_bytes);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw FormatError("checkpoint: corrupt manifest (truncated)");

  struct Entry {
    std::string name;
    std::size_t offset;
    std::vector<std::size_t> shape;
  };
  std::vector<Entry> entries;
  Checkpoint ck;
  std::istringstream lines(text);
  std::string line;
  bool have_version = false;
  std::size_t expected_offset = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "version") {
      int v = 0;
      if (!(ls >> v)) throw FormatError("checkpoint: corrupt manifest (version)");
      if (v != kCheckpointVersion) {
        throw FormatError("checkpoint: version mismatch (file " + std::to_string(v) + ", expected " +
                          std::to_string(kCheckpointVersion) + ")");
      }
      have_version = true;
    } else if (kind == "meta") {
      std::string key;
      if (!(ls >> key)) throw FormatError("checkpoint: corrupt manifest (meta)");
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ck.meta[key] = value;
    } else if (kind == "tensor") {
      Entry e;
      std::string dtype;
      std::size_t rank = 0;
      if (!(ls >> e.name >> dtype >> e.offset >> rank) || dtype != "f32" || rank < 1 || rank > 2) {
        throw FormatError("checkpoint: corrupt manifest line '" + line + "'");
      }
      e.shape.resize(rank);
      for (auto& d : e.shape) {
        if (!(ls >> d)) throw FormatError("checkpoint: corrupt manifest line '" + line + "'");
      }
      if (e.offset != expected_offset) throw FormatError("checkpoint: corrupt manifest (offset of " + e.name + ")");
      std::size_t n = 1;
      for (auto d : e.shape) n *= d;
      expected_offset += n * 4;
      entries.push_back(std::move(e));
    } else {
      throw FormatError("checkpoint: corrupt manifest line '" + line + "'");
    }
  }
  if (!have_version) throw FormatError("checkpoint: corrupt manifest (missing version)");

  std::vector<unsigned char> blob(expected_offset);
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (static_cast<std::size_t>(in.gcount()) != blob.size()) {
    throw FormatError("checkpoint: truncated blob (expected " + std::to_string(blob.size()) + " bytes, got " +
                      std::to_string(in.gcount()) + ")");
  }
  for (const auto& e : entries) {
    try {
      ck.params.add(e.name, e.shape);
    } catch (const ValidationError&) {
      throw FormatError("checkpoint: corrupt manifest (duplicate tensor " + e.name + ")");
    }
    auto& t = ck.params[ck.params.size() - 1];
    for (std::size_t j = 0; j < t.size(); ++j) t.raw()[j] = std::bit_cast<float>(get_u32(&blob[e.offset + j * 4]));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace ccgen::nn
