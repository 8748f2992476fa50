#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "aqua/backbone.hpp"
#include "aqua/errors.hpp"

// Checkpoint container. Explicit little-endian layout so files are
// byte-stable across platforms:
//   magic "AQNT" | u16 version | u32 entry count |
//   per entry: u16 name length, name bytes, u8 dtype (0 = f32), u8 ndim,
//              u32 dims x ndim, raw little-endian values.

namespace aqua {

namespace ckpt_detail {

inline constexpr char kMagic[4] = {'A', 'Q', 'N', 'T'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t u16() {
    const char* p = take(2);
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(p[0]) |
                                      (static_cast<std::uint8_t>(p[1]) << 8));
  }
  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t len) { return std::string(take(len), len); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("checkpoint '" + path_ + "' is truncated");
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace ckpt_detail

struct CheckpointEntry {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

inline void save_checkpoint(const std::vector<const Param<float>*>& params,
                            const std::string& path) {
  std::string out;
  out.append(ckpt_detail::kMagic, 4);
  ckpt_detail::put_u16(out, ckpt_detail::kVersion);
  ckpt_detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Param<float>* p : params) {
    if (p->name.size() > 0xFFFF) throw ContractError("checkpoint: name too long: " + p->name);
    ckpt_detail::put_u16(out, static_cast<std::uint16_t>(p->name.size()));
    out.append(p->name);
    out.push_back(static_cast<char>(ckpt_detail::kDtypeF32));
    out.push_back(static_cast<char>(4));
    const Shape s = p->value.shape();
    for (int d : {s.n, s.c, s.h, s.w}) ckpt_detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (std::int64_t i = 0; i < p->value.numel(); ++i) ckpt_detail::put_f32(out, p->value[i]);
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot create '" + tmp + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
      std::remove(tmp.c_str());
      throw IoError("write failed for '" + tmp + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot move temporary file onto '" + path + "'");
  }
}

inline void save_checkpoint(AquaNetParams<float>& params, const std::string& path) {
  std::vector<const Param<float>*> list;
  for (Param<float>* p : params.all()) list.push_back(p);
  save_checkpoint(list, path);
}

/// Raw entries in file order; validates framing only.
inline std::vector<std::pair<std::string, CheckpointEntry>> read_checkpoint_raw(
    const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ckpt_detail::Reader r(bytes, path);
  if (r.str(4) != std::string(ckpt_detail::kMagic, 4)) {
    throw FormatError("checkpoint '" + path + "' has bad magic");
  }
  const std::uint16_t version = r.u16();
  if (version != ckpt_detail::kVersion) {
    throw FormatError("checkpoint '" + path + "' has unsupported version " +
                      std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<std::pair<std::string, CheckpointEntry>> entries;
  entries.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const std::uint8_t dtype = r.u8();
    if (dtype != ckpt_detail::kDtypeF32) {
      throw FormatError("checkpoint '" + path + "' entry '" + name + "' has unknown dtype tag " +
                        std::to_string(dtype));
    }
    const std::uint8_t ndim = r.u8();
    CheckpointEntry entry;
    std::uint64_t numel = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      entry.dims.push_back(r.u32());
      numel *= entry.dims.back();
    }
    if (numel > (std::uint64_t{1} << 31)) {
      throw FormatError("checkpoint '" + path + "' entry '" + name + "' is implausibly large");
    }
    entry.values.resize(static_cast<std::size_t>(numel));
    for (auto& v : entry.values) v = r.f32();
    for (const auto& [n, unused] : entries) {
      (void)unused;
      if (n == name) throw FormatError("checkpoint '" + path + "' has duplicate entry '" + name + "'");
    }
    entries.emplace_back(std::move(name), std::move(entry));
  }
  if (!r.done()) throw FormatError("checkpoint '" + path + "' has trailing bytes");
  return entries;
}

/// Loads into a parameter set built for `config`. The stored name set must
/// match the expected one exactly; the error lists what is missing or extra.
inline AquaNetParams<float> load_checkpoint(const std::string& path, const AquaNetConfig& config) {
  auto entries = read_checkpoint_raw(path);
  std::map<std::string, CheckpointEntry*> by_name;
  for (auto& [name, entry] : entries) by_name[name] = &entry;

  AquaNetParams<float> params = make_params<float>(config);
  std::string missing, extra;
  auto expected = params.all();
  for (Param<float>* p : expected) {
    if (!by_name.count(p->name)) missing += (missing.empty() ? "" : ", ") + p->name;
  }
  for (auto& [name, entry] : entries) {
    (void)entry;
    bool known = false;
    for (Param<float>* p : expected) {
      if (p->name == name) {
        known = true;
        break;
      }
    }
    if (!known) extra += (extra.empty() ? "" : ", ") + name;
  }
  if (!missing.empty() || !extra.empty()) {
    throw ConfigError("checkpoint '" + path + "' does not match the model config" +
                      (missing.empty() ? "" : "; missing: " + missing) +
                      (extra.empty() ? "" : "; extra: " + extra));
  }
  for (Param<float>* p : expected) {
    const CheckpointEntry& entry = *by_name[p->name];
    const Shape s = p->value.shape();
    const std::vector<std::uint32_t> want = {
        static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
        static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    if (entry.dims != want) {
      throw ConfigError("checkpoint '" + path + "' entry '" + p->name + "' has mismatched shape");
    }
    for (std::size_t i = 0; i < entry.values.size(); ++i) {
      p->value[static_cast<std::int64_t>(i)] = entry.values[i];
    }
  }
  return params;
}

/// Reconstructs the model config from the stored names and shapes, then
/// validates as load_checkpoint does.
inline AquaNetParams<float> load_checkpoint_infer(const std::string& path) {
  auto entries = read_checkpoint_raw(path);
  AquaNetConfig cfg;
  cfg.enable_frequency = false;
  cfg.enable_illumination = false;
  bool have_stem = false;
  for (auto& [name, entry] : entries) {
    if (name == "enc.stem.w") {
      if (entry.dims.size() == 4) cfg.base_channels = static_cast<int>(entry.dims[0]);
      have_stem = true;
    } else if (name == "freq.alpha") {
      cfg.enable_frequency = true;
    } else if (name == "illum.conv1.w") {
      cfg.enable_illumination = true;
    }
  }
  if (!have_stem) throw FormatError("checkpoint '" + path + "' lacks the stem entry");
  return load_checkpoint(path, cfg);
}

}  // namespace aqua
