#include "tnnsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <string_view>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tnnsim/errors.hpp"

namespace tnnsim::config {

const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys = {
      {"device.lrs_median", "20000", "LRS median resistance (ohm)"},
      {"device.lrs_sigma", "0.15", "LRS lognormal shape"},
      {"device.hrs_median", "350000", "HRS median resistance (ohm)"},
      {"device.hrs_sigma", "0.5", "HRS lognormal shape"},
      {"pcsa.vdd", "0.6", "supply voltage (V); built-in sets exist for 0.6 and 1.2"},
      {"pcsa.jitter_sigma", "0.04", "lognormal shape of the per-read time spread"},
      {"pcsa.params_file", "", "parameter file written by `calibrate` (overrides the built-in set)"},
      {"pcsa.anchors_file", "", "CSV r_bl_ohm,r_blb_ohm,vdd_v,target_ns used by `calibrate`"},
      {"array.window_ns", "70", "read window for array-backed inference (ns)"},
      {"array.map_vdds", "0.6,1.2", "voltages written by `map`"},
      {"array.map_points", "50", "grid points per axis of the switching-time map"},
      {"array.map_r_min", "10000", "map grid lower bound (ohm)"},
      {"array.map_r_max", "1000000", "map grid upper bound (ohm)"},
      {"array.map_threshold_ns", "70", "slow-cell threshold reported by `map` (ns)"},
      {"array.sweep_r_blb", "100000", "fixed BLb resistance of the convergence sweep (ohm)"},
      {"array.sweep_r_bl",
       "10000,15000,20000,25000,30000,40000,50000,60000,70000,80000,90000,100000,110000,120000",
       "BL resistances of the convergence sweep (ohm)"},
      {"array.sweep_window_ns", "50", "sense window of the convergence sweep (ns)"},
      {"array.sweep_trials", "100", "reads per sweep point"},
      {"train.mode", "tnn", "tnn or bnn"},
      {"train.arch", "d512,d512,d10", "cN conv 3x3, p max pool, dN dense; last token is the output"},
      {"train.weight_delta", "0.05", "weight ternarization threshold"},
      {"train.act_delta", "0.05", "activation threshold"},
      {"train.batch_size", "128", "minibatch size"},
      {"train.epochs", "30", "training epochs"},
      {"train.lr_max", "0.005", "peak learning rate"},
      {"train.lr_min", "0", "floor learning rate"},
      {"train.restart_period", "50", "first cosine period (epochs)"},
      {"train.restart_factor", "2", "period multiplier at each restart"},
      {"train.weight_decay", "0.0001", "decoupled weight decay on latent weights"},
      {"train.augment", "false", "flip plus crop-or-rotate augmentation"},
      {"train.rotation_deg", "15", "rotation bound (degrees)"},
      {"train.pad", "4", "padding before random crop (pixels)"},
      {"train.train_limit", "0", "use only the first N training images (0 = all)"},
      {"train.threads", "1", "threads for test-set inference"},
      {"faults.error_types", "1,2", "error types swept by `inject-sweep`"},
      {"faults.runs", "5", "runs per BER point"},
      {"faults.ber_grid", "", "comma-separated BER values (empty = 13 log points 1e-4..1e-1)"},
      {"faults.array_runs", "5", "seeds evaluated by `array-eval`"},
      {"data.format", "mnist", "mnist or cifar10"},
      {"data.dir", "data/mnist", "dataset directory"},
      {"data.test_limit", "0", "evaluate only the first N test images (0 = all)"},
  };
  return keys;
}

namespace {

const KeyInfo* find_key(const std::string& key) {
  for (const KeyInfo& k : known_keys())
    if (key == k.key) return &k;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(std::istream& in) {
  Config c;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": key outside a section");
    try {
      c.set(section + "." + trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

Config Config::parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in);
}

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

std::string Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const KeyInfo* k = find_key(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  return k->default_value;
}

double Config::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + v + "' is not a number");
  }
}

std::size_t Config::get_size(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get(key));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + tok + "' is not a number");
    }
  }
  return out;
}

std::string Config::canonical() const {
  std::vector<std::string> lines;
  for (const KeyInfo& k : known_keys()) lines.push_back(std::string(k.key) + "=" + get(k.key));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  return out;
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

device::ProgrammingProfile programming_profile(const Config& c) {
  device::ProgrammingProfile p;
  p.lrs_median = c.get_double("device.lrs_median");
  p.lrs_sigma = c.get_double("device.lrs_sigma");
  p.hrs_median = c.get_double("device.hrs_median");
  p.hrs_sigma = c.get_double("device.hrs_sigma");
  p.validate();
  return p;
}

pcsa::PcsaParams pcsa_params(const Config& c) {
  const std::string file = c.get("pcsa.params_file");
  pcsa::PcsaParams p = file.empty() ? pcsa::default_params(c.get_double("pcsa.vdd")) : read_params_file(file);
  p.jitter_sigma = c.get_double("pcsa.jitter_sigma");
  p.validate();
  return p;
}

array::ReadConfig read_config(const Config& c) {
  array::ReadConfig r;
  r.window = c.get_double("array.window_ns") * 1e-9;
  r.pcsa = pcsa_params(c);
  r.validate();
  return r;
}

train::TrainConfig train_config(const Config& c) {
  train::TrainConfig t;
  const std::string mode = c.get("train.mode");
  if (mode == "tnn")
    t.mode = train::Mode::TNN;
  else if (mode == "bnn")
    t.mode = train::Mode::BNN;
  else
    throw ConfigError("train.mode: expected tnn or bnn, got '" + mode + "'");
  t.arch = c.get("train.arch");
  t.weight_delta = c.get_double("train.weight_delta");
  t.act_delta = c.get_double("train.act_delta");
  t.batch_size = c.get_size("train.batch_size");
  t.epochs = c.get_size("train.epochs");
  t.schedule.lr_max = c.get_double("train.lr_max");
  t.schedule.lr_min = c.get_double("train.lr_min");
  t.schedule.period_epochs = c.get_double("train.restart_period");
  t.schedule.period_factor = c.get_double("train.restart_factor");
  t.adam.weight_decay = c.get_double("train.weight_decay");
  t.augment.enabled = c.get_bool("train.augment");
  t.augment.max_rotation_deg = c.get_double("train.rotation_deg");
  t.augment.pad = c.get_size("train.pad");
  t.train_limit = c.get_size("train.train_limit");
  t.eval_threads = static_cast<unsigned>(std::max<std::size_t>(1, c.get_size("train.threads")));
  t.validate();
  return t;
}

namespace {

const char* const kParamKeys[] = {"vdd", "branch_capacitance", "trip_fraction",
                                  "min_differential", "latch_delay", "jitter_sigma"};

double* param_slot(pcsa::PcsaParams& p, const std::string& key) {
  if (key == "vdd") return &p.vdd;
  if (key == "branch_capacitance") return &p.branch_capacitance;
  if (key == "trip_fraction") return &p.trip_fraction;
  if (key == "min_differential") return &p.min_differential;
  if (key == "latch_delay") return &p.latch_delay;
  if (key == "jitter_sigma") return &p.jitter_sigma;
  return nullptr;
}

}  // namespace

void write_params_file(std::ostream& out, const pcsa::PcsaParams& p) {
  pcsa::PcsaParams copy = p;
  char buf[64];
  for (const char* key : kParamKeys) {
    const auto res = std::to_chars(buf, buf + sizeof buf, *param_slot(copy, key));
    out << key << '=' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  }
}

pcsa::PcsaParams read_params_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open parameter file " + path.string());
  pcsa::PcsaParams p;
  std::size_t seen = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    double* slot = eq == std::string::npos ? nullptr : param_slot(p, trim(line.substr(0, eq)));
    if (!slot) throw ConfigError(path.string() + ": unexpected line '" + line + "'");
    try {
      *slot = std::stod(trim(line.substr(eq + 1)));
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ": bad value in '" + line + "'");
    }
    ++seen;
  }
  if (seen != std::size(kParamKeys)) throw ConfigError(path.string() + ": expected 6 parameters");
  p.validate();
  return p;
}

}  // namespace tnnsim::config
