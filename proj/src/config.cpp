#include "novsal/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "novsal/error.hpp"

namespace novsal {

std::string to_string(Preprocess p) { return p == Preprocess::Raw ? "raw" : "vbp"; }

Preprocess parse_preprocess(const std::string& text) {
  if (text == "raw") return Preprocess::Raw;
  if (text == "vbp") return Preprocess::Vbp;
  throw UsageError("unknown preprocessing mode '" + text + "' (expected raw or vbp)");
}

std::string to_string(CalibrationSet c) { return c == CalibrationSet::Train ? "train" : "heldout"; }

std::filesystem::path RunConfig::in_out(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return out_dir / p;
}

TrainConfig RunConfig::cnn_train_config() const {
  TrainConfig c;
  c.batch = batch;
  c.epochs = cnn_epochs;
  c.learning_rate = cnn_learning_rate;
  c.seed = cnn_seed;
  return c;
}

TrainConfig RunConfig::ae_train_config() const {
  TrainConfig c;
  c.batch = batch;
  c.epochs = ae_epochs;
  c.learning_rate = ae_learning_rate;
  c.seed = ae_seed;
  c.loss = loss;
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const unsigned long long x = std::stoull(v, &used, 10);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return static_cast<T>(x);
  } catch (const std::logic_error&) {
    throw UsageError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::logic_error&) {
    throw UsageError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config key '" + key + "': expected true/false, got '" + v + "'");
}

char parse_world(const std::string& key, const std::string& v) {
  if (v == "A" || v == "B") return v[0];
  throw UsageError("config key '" + key + "': expected A or B, got '" + v + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PATH_FIELD(name)                                                                      \
  {                                                                                           \
    #name, {                                                                                  \
      [](RunConfig& c, const std::string&, const std::string& v) { c.name = v; },             \
          [](const RunConfig& c) { return c.name.string(); }                                  \
    }                                                                                         \
  }
#define UINT_FIELD(name, T)                                                                   \
  {                                                                                           \
    #name, {                                                                                  \
      [](RunConfig& c, const std::string& k, const std::string& v) {                          \
        c.name = parse_unsigned<T>(k, v);                                                     \
      },                                                                                      \
          [](const RunConfig& c) { return std::to_string(c.name); }                           \
    }                                                                                         \
  }
#define DOUBLE_FIELD(name)                                                                    \
  {                                                                                           \
    #name, {                                                                                  \
      [](RunConfig& c, const std::string& k, const std::string& v) {                          \
        c.name = parse_double(k, v);                                                          \
      },                                                                                      \
          [](const RunConfig& c) { return fmt_double(c.name); }                               \
    }                                                                                         \
  }
#define WORLD_FIELD(name)                                                                     \
  {                                                                                           \
    #name, {                                                                                  \
      [](RunConfig& c, const std::string& k, const std::string& v) {                          \
        c.name = parse_world(k, v);                                                           \
      },                                                                                      \
          [](const RunConfig& c) { return std::string(1, c.name); }                           \
    }                                                                                         \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      PATH_FIELD(out_dir),
      PATH_FIELD(target_manifest),
      PATH_FIELD(novel_manifest),
      WORLD_FIELD(target_world),
      WORLD_FIELD(novel_world),
      UINT_FIELD(target_world_seed, std::uint64_t),
      UINT_FIELD(novel_world_seed, std::uint64_t),
      UINT_FIELD(target_count, std::size_t),
      UINT_FIELD(novel_count, std::size_t),
      UINT_FIELD(eval_count, std::size_t),
      DOUBLE_FIELD(train_fraction),
      UINT_FIELD(split_seed, std::uint64_t),
      PATH_FIELD(cnn_weights),
      PATH_FIELD(ae_weights),
      PATH_FIELD(threshold_file),
      PATH_FIELD(input_dir),
      PATH_FIELD(mask_dir),
      UINT_FIELD(cnn_epochs, std::size_t),
      DOUBLE_FIELD(cnn_learning_rate),
      UINT_FIELD(cnn_seed, std::uint64_t),
      {"random_labels",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.random_labels = parse_bool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.random_labels ? "true" : "false"); }}},
      {"loss",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.loss = parse_loss_kind(v); },
        [](const RunConfig& c) { return to_string(c.loss); }}},
      {"preprocess",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.preprocess = parse_preprocess(v);
        },
        [](const RunConfig& c) { return to_string(c.preprocess); }}},
      UINT_FIELD(ae_epochs, std::size_t),
      DOUBLE_FIELD(ae_learning_rate),
      UINT_FIELD(ae_seed, std::uint64_t),
      UINT_FIELD(batch, std::size_t),
      DOUBLE_FIELD(percentile),
      {"calibration",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "train") {
            c.calibration = CalibrationSet::Train;
          } else if (v == "heldout") {
            c.calibration = CalibrationSet::Heldout;
          } else {
            throw UsageError("config key '" + k + "': expected train or heldout, got '" + v + "'");
          }
        },
        [](const RunConfig& c) { return to_string(c.calibration); }}},
      {"experiment",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (!v.empty() && v != "E0" && v != "E1" && v != "E2" && v != "E3") {
            throw UsageError("config key '" + k + "': expected E0, E1, E2 or E3, got '" + v + "'");
          }
          c.experiment = v;
        },
        [](const RunConfig& c) { return c.experiment; }}},
      {"noise_sigmas",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          std::vector<double> sigmas;
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) {
            const double s = parse_double(k, trim(item));
            if (!(s >= 0.0)) throw UsageError("config key '" + k + "': sigma must be >= 0");
            sigmas.push_back(s);
          }
          if (sigmas.empty()) throw UsageError("config key '" + k + "': empty list");
          c.noise_sigmas = std::move(sigmas);
        },
        [](const RunConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.noise_sigmas.size(); ++i) {
            if (i) out += ",";
            out += fmt_double(c.noise_sigmas[i]);
          }
          return out;
        }}},
      UINT_FIELD(noise_seed, std::uint64_t),
      DOUBLE_FIELD(edge_band_halfwidth),
  };
  return table;
}

#undef PATH_FIELD
#undef UINT_FIELD
#undef DOUBLE_FIELD
#undef WORLD_FIELD

}  // namespace

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw UsageError("unknown config key '" + key + "'");
  // Validate on a copy so a rejected value leaves `config` untouched.
  RunConfig next = config;
  it->second.set(next, key, value);
  if (key == "percentile" && !(next.percentile > 0.0 && next.percentile < 1.0)) {
    throw UsageError("config key 'percentile' must be in (0,1)");
  }
  if (key == "train_fraction" && !(next.train_fraction > 0.0 && next.train_fraction < 1.0)) {
    throw UsageError("config key 'train_fraction' must be in (0,1)");
  }
  config = std::move(next);
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_setting(config, key, value);
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig config;
  apply_config_text(config, ss.str(), path.string());
  return config;
}

std::string config_to_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace novsal
