#include "protoclue/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>

namespace protoclue {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("'" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("'" + key + "': expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(RunManifest&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto sz = [&t](const char* name, auto field) {
      t[name] = [field](RunManifest& m, const std::string& k, const std::string& v) {
        field(m) = static_cast<std::size_t>(to_uint(k, v));
      };
    };
    auto real = [&t](const char* name, auto field) {
      t[name] = [field](RunManifest& m, const std::string& k, const std::string& v) {
        field(m) = to_double(k, v);
      };
    };
    auto flag = [&t](const char* name, auto field) {
      t[name] = [field](RunManifest& m, const std::string& k, const std::string& v) {
        field(m) = to_bool(k, v);
      };
    };
    auto path = [&t](const char* name, auto field) {
      t[name] = [field](RunManifest& m, const std::string&, const std::string& v) {
        field(m) = v;
      };
    };

    sz("k", [](RunManifest& m) -> std::size_t& { return m.config.k_labels; });
    sz("bank_capacity", [](RunManifest& m) -> std::size_t& { return m.config.bank_capacity; });
    sz("batch_size", [](RunManifest& m) -> std::size_t& { return m.config.batch_size; });
    t["class_count"] = [](RunManifest& m, const std::string& k, const std::string& v) {
      m.config.class_count = static_cast<std::size_t>(to_uint(k, v));
      m.synthetic.class_count = m.config.class_count;
    };
    sz("frames_per_window", [](RunManifest& m) -> std::size_t& { return m.config.frames_per_window; });
    sz("internal_dim", [](RunManifest& m) -> std::size_t& { return m.config.internal_dim; });
    sz("top_k", [](RunManifest& m) -> std::size_t& { return m.config.top_k; });
    sz("source_epochs", [](RunManifest& m) -> std::size_t& { return m.source_epochs; });
    real("mu1", [](RunManifest& m) -> double& { return m.config.mu1; });
    real("mu2", [](RunManifest& m) -> double& { return m.config.mu2; });
    real("alpha", [](RunManifest& m) -> double& { return m.config.alpha; });
    real("lr", [](RunManifest& m) -> double& { return m.config.learning_rate; });
    real("tau_obs", [](RunManifest& m) -> double& { return m.config.tau_obs_s; });
    real("tau_interval", [](RunManifest& m) -> double& { return m.config.tau_interval_s; });
    real("kl_epsilon", [](RunManifest& m) -> double& { return m.config.kl_epsilon; });
    real("fraction", [](RunManifest& m) -> double& { return m.fraction; });
    real("source_lr", [](RunManifest& m) -> double& { return m.source_lr; });
    t["seed"] = [](RunManifest& m, const std::string& k, const std::string& v) {
      m.seed = to_uint(k, v);
      m.synthetic.seed = m.seed;
    };
    flag("use_mlpgm", [](RunManifest& m) -> bool& { return m.toggles.use_mlpgm; });
    flag("use_visual_clue", [](RunManifest& m) -> bool& { return m.toggles.use_visual_clue; });
    flag("use_textual_clue", [](RunManifest& m) -> bool& { return m.toggles.use_textual_clue; });
    flag("use_consistency", [](RunManifest& m) -> bool& { return m.toggles.use_consistency; });
    flag("multi_label", [](RunManifest& m) -> bool& { return m.toggles.multi_label; });
    flag("use_confidence", [](RunManifest& m) -> bool& { return m.toggles.use_confidence; });
    path("head", [](RunManifest& m) -> std::filesystem::path& { return m.head_path; });
    path("target", [](RunManifest& m) -> std::filesystem::path& { return m.target_path; });
    path("labels", [](RunManifest& m) -> std::filesystem::path& { return m.labels_path; });
    path("class_text", [](RunManifest& m) -> std::filesystem::path& { return m.class_text_path; });
    path("output_dir", [](RunManifest& m) -> std::filesystem::path& { return m.output_dir; });
    t["setting"] = [](RunManifest& m, const std::string&, const std::string& v) { m.setting = v; };
    t["vocabulary"] = [](RunManifest& m, const std::string&, const std::string& v) {
      m.vocabulary = v;
    };
    sz("synthetic_dim", [](RunManifest& m) -> std::size_t& { return m.synthetic.dim; });
    sz("synthetic_labels", [](RunManifest& m) -> std::size_t& { return m.synthetic.labels_per_sample; });
    sz("synthetic_samples", [](RunManifest& m) -> std::size_t& { return m.synthetic.samples; });
    real("synthetic_angle", [](RunManifest& m) -> double& { return m.synthetic.view_rotation_angle; });
    real("synthetic_sigma", [](RunManifest& m) -> double& { return m.synthetic.view_noise_sigma; });
    return t;
  }();
  return table;
}

}  // namespace

void apply_setting(RunManifest& manifest, const std::string& key, const std::string& value) {
  std::string k = key;
  std::replace(k.begin(), k.end(), '-', '_');
  const auto& table = setters();
  const auto it = table.find(k);
  if (it == table.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second(manifest, k, trim(value));
}

void apply_config_file(RunManifest& manifest, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      apply_setting(manifest, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = trim(text.substr(pos, comma - pos));
    if (item.empty()) throw ConfigError("empty entry in value list '" + text + "'");
    out.push_back(to_double("values", item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace protoclue
