#include "protoclue/stream.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace protoclue {

namespace {

using json = nlohmann::json;

template <class T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    if constexpr (sizeof(T) > 1) u >>= 8;
  }
}

void put_f32(std::string& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }

void put_floats(std::string& out, std::span<const float> values) {
  for (float v : values) put_f32(out, v);
}

std::string encode_binary(const FeatureFile& file) {
  std::string out(kMagic, 4);
  put_le(out, kFormatVersion);
  put_le(out, file.dim);
  put_le(out, file.frames_per_window);
  put_le(out, static_cast<std::uint64_t>(file.records.size()));
  for (const FeatureRecord& r : file.records) {
    put_le(out, static_cast<std::uint16_t>(r.sample_id.size()));
    out += r.sample_id;
    put_le(out, static_cast<std::uint8_t>(r.view));
    if (r.view == View::Parameter) {
      const std::size_t cols = r.frame_features.empty() ? 0 : r.frame_features.front().size();
      put_le(out, static_cast<std::uint32_t>(r.frame_features.size()));
      put_le(out, static_cast<std::uint32_t>(cols));
      for (const auto& row : r.frame_features) put_floats(out, row);
      continue;
    }
    for (const auto& frame : r.frame_features) put_floats(out, frame);
    put_floats(out, r.visual_clue);
    put_floats(out, r.textual_clue);
    put_le(out, static_cast<std::uint16_t>(r.labels.size()));
    for (std::uint16_t l : r.labels) put_le(out, l);
  }
  return out;
}

const char* view_key(View v) {
  switch (v) {
    case View::Ego: return "ego";
    case View::Exo: return "exo";
    case View::Parameter: return "param";
  }
  return "?";
}

View parse_view(const std::string& s, std::uint64_t offset) {
  if (s == "ego") return View::Ego;
  if (s == "exo") return View::Exo;
  if (s == "param") return View::Parameter;
  throw FormatError("unknown view '" + s + "'", offset);
}

std::string encode_jsonl(const FeatureFile& file) {
  std::ostringstream out;
  json header = {{"magic", std::string(kMagic, 4)},
                 {"version", kFormatVersion},
                 {"dim", file.dim},
                 {"frames_per_window", file.frames_per_window},
                 {"count", file.records.size()}};
  out << header.dump() << '\n';
  for (const FeatureRecord& r : file.records) {
    json j;
    j["id"] = r.sample_id;
    j["view"] = view_key(r.view);
    j["frames"] = r.frame_features;
    if (r.view != View::Parameter) {
      j["visual"] = r.visual_clue;
      j["textual"] = r.textual_clue;
      j["labels"] = r.labels;
    }
    out << j.dump() << '\n';
  }
  return out.str();
}

std::vector<float> json_floats(const json& j, std::uint64_t offset) {
  if (!j.is_array()) throw FormatError("expected a float array", offset);
  std::vector<float> out;
  out.reserve(j.size());
  for (const json& v : j) {
    if (!v.is_number()) throw FormatError("expected a number", offset);
    out.push_back(static_cast<float>(v.get<double>()));
  }
  return out;
}

FeatureFile decode_jsonl(std::istream& in) {
  FeatureFile file;
  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(in, line)) throw FormatError("missing header line", 0);
  std::uint64_t count = 0;
  try {
    const json h = json::parse(line);
    if (h.at("magic").get<std::string>() != std::string(kMagic, 4))
      throw FormatError("bad magic", 0);
    if (h.at("version").get<std::uint32_t>() != kFormatVersion)
      throw FormatError("unsupported version", 0);
    file.dim = h.at("dim").get<std::uint32_t>();
    file.frames_per_window = h.at("frames_per_window").get<std::uint32_t>();
    count = h.at("count").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad header: ") + e.what(), 0);
  }
  offset += line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    try {
      const json j = json::parse(line);
      FeatureRecord r;
      r.sample_id = j.at("id").get<std::string>();
      r.view = parse_view(j.at("view").get<std::string>(), offset);
      for (const json& f : j.at("frames")) r.frame_features.push_back(json_floats(f, offset));
      if (r.view != View::Parameter) {
        r.visual_clue = json_floats(j.at("visual"), offset);
        r.textual_clue = json_floats(j.at("textual"), offset);
        r.labels = j.at("labels").get<std::vector<std::uint16_t>>();
      }
      file.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw FormatError(std::string("bad record: ") + e.what(), offset);
    }
    offset += line.size() + 1;
  }
  if (file.records.size() != count) throw FormatError("record count mismatch", offset);
  return file;
}

}  // namespace

const char* view_name(View v) { return view_key(v); }

Encoding encoding_for(const std::filesystem::path& path) {
  return path.extension() == ".jsonl" ? Encoding::JsonLines : Encoding::Binary;
}

void validate_records(const FeatureFile& file) {
  for (const FeatureRecord& r : file.records) {
    if (r.sample_id.size() > std::numeric_limits<std::uint16_t>::max())
      throw InvalidInput("record id too long");
    auto all_finite = [](std::span<const float> v) {
      return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
    };
    if (r.view == View::Parameter) {
      if (r.frame_features.empty()) throw InvalidInput("parameter record '" + r.sample_id + "' is empty");
      const std::size_t cols = r.frame_features.front().size();
      for (const auto& row : r.frame_features) {
        if (row.size() != cols) throw InvalidInput("parameter record rows differ in length");
      }
      continue;
    }
    if (r.frame_features.size() != file.frames_per_window)
      throw InvalidInput("record '" + r.sample_id + "': frame count differs from header");
    for (const auto& f : r.frame_features) {
      if (f.size() != file.dim) throw InvalidInput("record '" + r.sample_id + "': frame dim mismatch");
      if (!all_finite(f)) throw InvalidInput("record '" + r.sample_id + "': non-finite frame feature");
    }
    if (r.visual_clue.size() != file.dim || r.textual_clue.size() != file.dim)
      throw InvalidInput("record '" + r.sample_id + "': clue dim mismatch");
    if (r.labels.size() > std::numeric_limits<std::uint16_t>::max())
      throw InvalidInput("too many labels");
  }
}

void write_records(const std::filesystem::path& path, const FeatureFile& file) {
  write_records(path, file, encoding_for(path));
}

void write_records(const std::filesystem::path& path, const FeatureFile& file, Encoding enc) {
  validate_records(file);
  const std::string bytes = enc == Encoding::Binary ? encode_binary(file) : encode_jsonl(file);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

FeatureFile read_records(const std::filesystem::path& path) {
  if (encoding_for(path) == Encoding::JsonLines) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return decode_jsonl(in);
  }
  RecordReader reader(path);
  FeatureFile file{reader.dim(), reader.frames_per_window(), {}};
  file.records.reserve(reader.record_count());
  while (auto r = reader.next()) file.records.push_back(std::move(*r));
  return file;
}

// ---- RecordReader ------------------------------------------------------------

RecordReader::RecordReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary) {
  if (!in_) throw Error("cannot open '" + path.string() + "'");
  char magic[4];
  read_exact(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic", 0);
  const std::uint64_t version_at = offset_;
  if (read_le<std::uint32_t>() != kFormatVersion)
    throw FormatError("unsupported format version", version_at);
  dim_ = read_le<std::uint32_t>();
  frames_ = read_le<std::uint32_t>();
  count_ = read_le<std::uint64_t>();
}

void RecordReader::read_exact(void* dst, std::size_t n) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("truncated file", offset_);
  offset_ += n;
}

template <class T>
T RecordReader::read_le() {
  unsigned char buf[sizeof(T)];
  read_exact(buf, sizeof(T));
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    if constexpr (sizeof(T) > 1) u <<= 8;
    u |= buf[i];
  }
  return static_cast<T>(u);
}

std::optional<FeatureRecord> RecordReader::next() {
  if (read_ == count_) {
    if (in_.peek() != std::char_traits<char>::eof())
      throw FormatError("trailing bytes after last record", offset_);
    return std::nullopt;
  }
  auto read_floats = [this](std::size_t n) {
    std::vector<float> v(n);
    for (float& x : v) x = std::bit_cast<float>(read_le<std::uint32_t>());
    return v;
  };
  FeatureRecord r;
  r.sample_id.resize(read_le<std::uint16_t>());
  if (!r.sample_id.empty()) read_exact(r.sample_id.data(), r.sample_id.size());
  const std::uint64_t tag_at = offset_;
  const auto tag = read_le<std::uint8_t>();
  if (tag > 2) throw FormatError("unknown view tag " + std::to_string(tag), tag_at);
  r.view = static_cast<View>(tag);
  if (r.view == View::Parameter) {
    const auto rows = read_le<std::uint32_t>();
    const auto cols = read_le<std::uint32_t>();
    r.frame_features.reserve(rows);
    for (std::uint32_t i = 0; i < rows; ++i) r.frame_features.push_back(read_floats(cols));
  } else {
    r.frame_features.reserve(frames_);
    for (std::uint32_t i = 0; i < frames_; ++i) r.frame_features.push_back(read_floats(dim_));
    r.visual_clue = read_floats(dim_);
    r.textual_clue = read_floats(dim_);
    r.labels.resize(read_le<std::uint16_t>());
    for (auto& l : r.labels) l = read_le<std::uint16_t>();
  }
  ++read_;
  return r;
}

// ---- conversions -------------------------------------------------------------

Vec to_vec(std::span<const float> values) { return Vec(values.begin(), values.end()); }

std::vector<float> to_floats(std::span<const double> values) {
  std::vector<float> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

Vec pooled_features(const FeatureRecord& record) {
  if (record.frame_features.empty()) throw InvalidInput("record has no frames");
  const std::size_t dim = record.frame_features.front().size();
  Vec mean(dim, 0.0);
  for (const auto& f : record.frame_features) {
    if (f.size() != dim) throw InvalidInput("record frames differ in dimension");
    for (std::size_t i = 0; i < dim; ++i) mean[i] += f[i];
  }
  for (double& v : mean) v /= double(record.frame_features.size());
  return mean;
}

ClueFeatures clue_features(const FeatureRecord& record) {
  return ClueFeatures{to_vec(record.visual_clue), to_vec(record.textual_clue)};
}

FeatureRecord parameter_record(const std::string& name, const Matrix& values) {
  FeatureRecord r;
  r.sample_id = name;
  r.view = View::Parameter;
  r.frame_features.reserve(values.rows());
  for (std::size_t i = 0; i < values.rows(); ++i) r.frame_features.push_back(to_floats(values.row(i)));
  return r;
}

Matrix parameter_matrix(const FeatureRecord& record) {
  if (record.view != View::Parameter) throw InvalidInput("not a parameter record");
  const std::size_t rows = record.frame_features.size();
  const std::size_t cols = rows == 0 ? 0 : record.frame_features.front().size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (record.frame_features[i].size() != cols) throw InvalidInput("ragged parameter record");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = record.frame_features[i][j];
  }
  return m;
}

const FeatureRecord& find_parameter(const FeatureFile& file, const std::string& name) {
  for (const FeatureRecord& r : file.records) {
    if (r.view == View::Parameter && r.sample_id == name) return r;
  }
  throw InvalidInput("missing parameter record '" + name + "'");
}

// ---- windows -----------------------------------------------------------------

std::vector<std::size_t> window_indices(std::span<const double> timestamps, double event_start,
                                        const EngineConfig& config) {
  if (timestamps.empty()) throw WindowOutOfRange("no frames available");
  const double start = event_start - (config.tau_interval_s + config.tau_obs_s);
  const double end = event_start - config.tau_interval_s;
  if (start < timestamps.front())
    throw WindowOutOfRange("observation window starts before the first frame");
  const std::size_t n = config.frames_per_window;
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? start : start + (end - start) * double(i) / double(n - 1);
    auto hi = std::lower_bound(timestamps.begin(), timestamps.end(), t);
    std::size_t idx;
    if (hi == timestamps.end()) {
      idx = timestamps.size() - 1;
    } else if (hi == timestamps.begin()) {
      idx = 0;
    } else {
      const std::size_t h = std::size_t(hi - timestamps.begin());
      idx = (*hi - t < t - timestamps[h - 1]) ? h : h - 1;
    }
    out.push_back(idx);
  }
  return out;
}

std::vector<Vec> extract_window(const TimedFrameSequence& seq, double event_start,
                                const EngineConfig& config) {
  if (seq.timestamps.size() != seq.features.size())
    throw InvalidInput("timestamps and features differ in length");
  for (std::size_t i = 1; i < seq.timestamps.size(); ++i) {
    if (!(seq.timestamps[i] > seq.timestamps[i - 1]))
      throw InvalidInput("timestamps must be strictly ascending");
  }
  std::vector<Vec> out;
  for (std::size_t idx : window_indices(seq.timestamps, event_start, config))
    out.push_back(seq.features[idx]);
  return out;
}

}  // namespace protoclue
