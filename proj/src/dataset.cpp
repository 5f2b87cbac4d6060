#include "fixthresh/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "fixthresh/csv.hpp"
#include "fixthresh/error.hpp"

namespace fixthresh::dataset {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::string> list_images(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path()))
      names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

std::vector<synthgen::ManifestEntry> list_labeled_dir(const std::string& dir) {
  require(fs::is_directory(dir), ErrorCode::io, "not a directory: " + dir);
  const fs::path manifest = fs::path(dir) / "manifest.csv";
  std::vector<synthgen::ManifestEntry> entries;
  if (fs::exists(manifest)) {
    const csv::Table t = csv::read_file(manifest.string());
    const int path_col = t.require_column("path");
    const int label_col = t.require_column("label");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const long label = csv::parse_long(t.rows[r][label_col],
                                         "manifest row " + std::to_string(r + 2));
      require(label == 0 || label == 1, ErrorCode::format,
              "manifest row " + std::to_string(r + 2) + ": label must be 0 or 1");
      entries.push_back({t.rows[r][path_col], static_cast<int>(label)});
    }
    require(!entries.empty(), ErrorCode::format, "manifest is empty: " + manifest.string());
    return entries;
  }
  const fs::path real_dir = fs::path(dir) / "real";
  const fs::path ai_dir = fs::path(dir) / "ai";
  require(fs::is_directory(real_dir) && fs::is_directory(ai_dir), ErrorCode::io,
          "expected manifest.csv or real/ and ai/ under " + dir);
  for (const auto& n : list_images(real_dir)) entries.push_back({"real/" + n, 0});
  for (const auto& n : list_images(ai_dir)) entries.push_back({"ai/" + n, 1});
  require(!entries.empty(), ErrorCode::io, "no images under " + dir);
  return entries;
}

detector::LabeledImage load_entry(const std::string& dir,
                                  const synthgen::ManifestEntry& entry) {
  detector::LabeledImage out;
  const fs::path full = fs::path(dir) / entry.path;
  out.image = imaging::to_unit(imaging::load_image(full.string()));
  out.label = entry.label;
  out.id = full.stem().string();
  return out;
}

std::vector<detector::LabeledImage> load_labeled_dir(const std::string& dir) {
  const auto entries = list_labeled_dir(dir);
  std::vector<detector::LabeledImage> images(entries.size());
  #pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(entries.size()); ++i)
    images[i] = load_entry(dir, entries[i]);
  return images;
}

}  // namespace fixthresh::dataset
