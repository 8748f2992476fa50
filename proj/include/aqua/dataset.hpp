#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "aqua/errors.hpp"

// Dataset layout: <root>/raw/*.png plus an optional <root>/reference/
// directory holding files with identical names. When reference/ exists the
// filename match must be bijective.

namespace aqua {

struct DatasetPair {
  std::string name;
  std::string raw_path;
  std::string reference_path;  // empty when the set is unpaired

  bool has_reference() const { return !reference_path.empty(); }
};

struct DatasetManifest {
  std::string root;
  bool has_references = false;
  std::vector<DatasetPair> pairs;
};

namespace dataset_detail {

inline bool is_png(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png";
}

inline std::vector<std::string> list_pngs(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && is_png(e.path())) names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace dataset_detail

/// Scans the layout and verifies every listed file exists right now.
inline DatasetManifest build_manifest(const std::string& root) {
  namespace fs = std::filesystem;
  const fs::path raw_dir = fs::path(root) / "raw";
  if (!fs::is_directory(raw_dir)) {
    throw ManifestError("dataset root '" + root + "' has no raw/ directory");
  }
  DatasetManifest m;
  m.root = root;
  const fs::path ref_dir = fs::path(root) / "reference";
  m.has_references = fs::is_directory(ref_dir);

  const auto raw_names = dataset_detail::list_pngs(raw_dir);
  for (const auto& name : raw_names) {
    DatasetPair pair;
    pair.name = name;
    pair.raw_path = (raw_dir / name).string();
    if (m.has_references) {
      const fs::path ref = ref_dir / name;
      if (!fs::is_regular_file(ref)) {
        throw ManifestError("raw image '" + name + "' has no matching file in reference/");
      }
      pair.reference_path = ref.string();
    }
    m.pairs.push_back(std::move(pair));
  }
  if (m.has_references) {
    for (const auto& name : dataset_detail::list_pngs(ref_dir)) {
      if (std::none_of(raw_names.begin(), raw_names.end(),
                       [&](const std::string& r) { return r == name; })) {
        throw ManifestError("reference image '" + name + "' has no matching file in raw/");
      }
    }
  }
  return m;
}

}  // namespace aqua
