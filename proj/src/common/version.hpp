#pragma once

namespace ctae {

inline constexpr const char* kProgramVersion = "1.0.0";

// Bumped on byte-layout changes; readers reject unknown major versions.
inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr int kContainerFormatVersion = 1;
inline constexpr int kGroundTruthFormatVersion = 1;
inline constexpr int kManifestFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

}  // namespace ctae
