#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dagmm_ho/features/spectrogram.hpp"
#include "dagmm_ho/numcore/binary_io.hpp"
#include "dagmm_ho/numcore/error.hpp"

namespace dagmm_ho {

/// One labeled time window of an audio file.
struct Segment {
  std::string file;  // relative to the manifest's directory
  double start = 0.0;  // seconds
  double end = 0.0;
  bool anomalous = false;
  std::string kind = "-";  // anomaly kind, "-" for normal segments

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

/// Frames lying entirely inside [start, end) seconds.
inline FrameRange frames_in_window(double start, double end, std::uint32_t sample_rate, std::size_t total_frames,
                                   const FeatureConfig& cfg) {
  const double s0 = std::ceil(start * sample_rate - 1e-6);
  const double s1 = std::floor(end * sample_rate + 1e-6);
  FrameRange r;
  const double hop = static_cast<double>(cfg.hop_size);
  r.begin = static_cast<std::size_t>(std::max(0.0, std::ceil(s0 / hop - 1e-9)));
  const double last_start = s1 - static_cast<double>(cfg.frame_size);
  if (last_start < 0.0) return {r.begin, r.begin};
  r.end = std::min(total_frames, static_cast<std::size_t>(std::floor(last_start / hop + 1e-9)) + 1);
  if (r.end < r.begin) r.end = r.begin;
  return r;
}

inline constexpr const char* kManifestHeader = "# file start end label kind";

inline std::string format_manifest(const std::vector<Segment>& segments) {
  std::ostringstream out;
  out.precision(17);
  out << kManifestHeader << '\n';
  for (const auto& s : segments)
    out << s.file << ' ' << s.start << ' ' << s.end << ' ' << (s.anomalous ? "anomaly" : "normal") << ' ' << s.kind
        << '\n';
  return out.str();
}

inline std::vector<Segment> parse_manifest(const std::string& text) {
  std::vector<Segment> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    Segment s;
    std::string label;
    if (!(fields >> s.file >> s.start >> s.end >> label >> s.kind))
      throw FormatError("manifest line " + std::to_string(lineno) + ": expected 'file start end label kind'");
    std::string extra;
    if (fields >> extra) throw FormatError("manifest line " + std::to_string(lineno) + ": trailing fields");
    if (label == "anomaly") s.anomalous = true;
    else if (label != "normal")
      throw FormatError("manifest line " + std::to_string(lineno) + ": label must be 'normal' or 'anomaly'");
    if (!(s.end > s.start) || s.start < 0.0)
      throw FormatError("manifest line " + std::to_string(lineno) + ": need 0 <= start < end");
    out.push_back(std::move(s));
  }
  return out;
}

inline void save_manifest(const std::filesystem::path& path, const std::vector<Segment>& segments) {
  write_file_atomic(path, format_manifest(segments));
}

inline std::vector<Segment> load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_manifest(std::string(bytes.begin(), bytes.end()));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace dagmm_ho
