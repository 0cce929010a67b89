#pragma once

#include <string>
#include <vector>

#include "datasets/datasets.hpp"
#include "datasets/synthetic.hpp"

namespace ctae {

// Multi-region trial container, one file per dataset. Little-endian, crc32
// (zlib polynomial) over everything before the trailing checksum; readers
// reject unknown format versions, truncation, and checksum mismatches.
// Byte layout is documented in the README.
void save_container(const std::string& path, const std::vector<RegionRecording>& regions);
std::vector<RegionRecording> load_container(const std::string& path);

// Planted ground truth for synthetic datasets, same framing rules.
void save_ground_truth(const std::string& path, const GroundTruth& truth);
GroundTruth load_ground_truth(const std::string& path);

}  // namespace ctae
