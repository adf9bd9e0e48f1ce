#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protoclue/core.hpp"
#include "protoclue/dccm.hpp"

namespace protoclue {

enum class View : std::uint8_t { Ego = 0, Exo = 1, Parameter = 2 };

const char* view_name(View v);

/// One observation window of the feature stream, or (view == Parameter) one
/// named parameter matrix stored as rows in frame_features.
struct FeatureRecord {
  std::string sample_id;
  View view = View::Ego;
  std::vector<std::vector<float>> frame_features;
  std::vector<float> visual_clue;
  std::vector<float> textual_clue;
  std::vector<std::uint16_t> labels;  // empty for unlabeled splits

  bool labeled() const noexcept { return !labels.empty(); }
  bool operator==(const FeatureRecord&) const = default;
};

/// Contents of one container file. dim and frames_per_window describe every
/// non-parameter record.
struct FeatureFile {
  std::uint32_t dim = 0;
  std::uint32_t frames_per_window = 0;
  std::vector<FeatureRecord> records;
};

enum class Encoding { Binary, JsonLines };

/// ".jsonl" selects JSON lines; anything else is the binary container.
Encoding encoding_for(const std::filesystem::path& path);

inline constexpr char kMagic[4] = {'E', 'E', 'F', 'C'};
inline constexpr std::uint32_t kFormatVersion = 1;

/// Checks record shapes against the header; throws InvalidInput.
void validate_records(const FeatureFile& file);

void write_records(const std::filesystem::path& path, const FeatureFile& file);
void write_records(const std::filesystem::path& path, const FeatureFile& file, Encoding enc);
FeatureFile read_records(const std::filesystem::path& path);

/// Incremental reader for the binary container.
class RecordReader {
 public:
  explicit RecordReader(const std::filesystem::path& path);

  std::uint32_t dim() const noexcept { return dim_; }
  std::uint32_t frames_per_window() const noexcept { return frames_; }
  std::uint64_t record_count() const noexcept { return count_; }

  /// Next record, or nullopt after the last one. Throws FormatError.
  std::optional<FeatureRecord> next();

 private:
  void read_exact(void* dst, std::size_t n);
  template <class T>
  T read_le();

  std::ifstream in_;
  std::uint64_t offset_ = 0;
  std::uint32_t dim_ = 0;
  std::uint32_t frames_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t read_ = 0;
};

// ---- record <-> engine values ---------------------------------------------

Vec to_vec(std::span<const float> values);
std::vector<float> to_floats(std::span<const double> values);

/// Mean over the record's frames, in double precision.
Vec pooled_features(const FeatureRecord& record);
ClueFeatures clue_features(const FeatureRecord& record);

FeatureRecord parameter_record(const std::string& name, const Matrix& values);
Matrix parameter_matrix(const FeatureRecord& record);
/// Throws InvalidInput if no parameter record has this name.
const FeatureRecord& find_parameter(const FeatureFile& file, const std::string& name);

// ---- observation windows ----------------------------------------------------

struct TimedFrameSequence {
  std::vector<double> timestamps;  // strictly ascending, seconds
  std::vector<Vec> features;
};

/// Frame indices selected for an event starting at event_start: target times
/// evenly spaced over [t_s - tau_i - tau_o, t_s - tau_i] with both ends
/// included (a single frame uses the start), each mapped to the nearest
/// timestamp with ties going to the earlier frame.
std::vector<std::size_t> window_indices(std::span<const double> timestamps, double event_start,
                                        const EngineConfig& config);

std::vector<Vec> extract_window(const TimedFrameSequence& seq, double event_start,
                                const EngineConfig& config);

}  // namespace protoclue
