#ifndef FIXTHRESH_DATASET_HPP
#define FIXTHRESH_DATASET_HPP

#include <string>
#include <vector>

#include "fixthresh/detector.hpp"
#include "fixthresh/synthgen.hpp"

namespace fixthresh::dataset {

// Resolves a labeled image directory: either dir/manifest.csv with
// `path,label` rows (paths relative to the manifest), or the two-directory
// convention dir/real and dir/ai.
std::vector<synthgen::ManifestEntry> list_labeled_dir(const std::string& dir);

// Loads every manifest entry as a unit-range tensor at native resolution.
// Entry ids are the file stems.
std::vector<detector::LabeledImage> load_labeled_dir(const std::string& dir);

detector::LabeledImage load_entry(const std::string& dir,
                                  const synthgen::ManifestEntry& entry);

}  // namespace fixthresh::dataset

#endif
