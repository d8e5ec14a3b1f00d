#include "bgcn/config.hpp"

#include "bgcn/rng.hpp"
#include "bgcn/text_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace bgcn {

namespace {

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw UsageError("config key '" + key + "': invalid value '" + value + "' (expected " + expected + ")");
}

long long to_integer(const std::string& key, const std::string& value) {
  const std::string s = trim(value);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, value, "an integer");
  return out;
}

double to_real(const std::string& key, const std::string& value) {
  const auto v = parse_double(value);
  if (!v) bad_value(key, value, "a number");
  return *v;
}

bool to_bool(const std::string& key, const std::string& value) {
  std::string s = trim(value);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::string> to_list(const std::string& value) {
  std::vector<std::string> out;
  for (const auto& cell : split_csv(value)) {
    const std::string item = trim(cell);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T, typename Section>
Field int_field(Section ExperimentConfig::*section, T Section::*member) {
  return {[=](ExperimentConfig& c, const std::string& v) { (c.*section).*member = static_cast<T>(to_integer("", v)); },
          [=](const ExperimentConfig& c) { return std::to_string((c.*section).*member); }};
}

template <typename Section>
Field real_field(Section ExperimentConfig::*section, double Section::*member) {
  return {[=](ExperimentConfig& c, const std::string& v) { (c.*section).*member = to_real("", v); },
          [=](const ExperimentConfig& c) { return format_double((c.*section).*member); }};
}

template <typename Section>
Field bool_field(Section ExperimentConfig::*section, bool Section::*member) {
  return {[=](ExperimentConfig& c, const std::string& v) { (c.*section).*member = to_bool("", v); },
          [=](const ExperimentConfig& c) { return std::string((c.*section).*member ? "true" : "false"); }};
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    using C = ExperimentConfig;
    std::map<std::string, Field> t;
    t["seed"] = {[](C& c, const std::string& v) {
                   const long long s = to_integer("seed", v);
                   if (s < 0) bad_value("seed", v, "a nonnegative integer");
                   c.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const C& c) { return std::to_string(c.seed); }};

    t["data.features"] = {[](C& c, const std::string& v) {
                            auto items = to_list(v);
                            if (items.empty()) bad_value("data.features", v, "a comma-separated list of names");
                            c.data.features = items;
                          },
                          [](const C& c) { return join(c.data.features); }};
    t["data.epsilon"] = real_field(&C::data, &DataConfig::epsilon);
    t["data.split"] = {[](C& c, const std::string& v) {
                         const auto items = to_list(v);
                         if (items.size() != 3) bad_value("data.split", v, "three ratios like 6,2,2");
                         c.data.split = {to_real("data.split", items[0]), to_real("data.split", items[1]),
                                         to_real("data.split", items[2])};
                       },
                       [](const C& c) {
                         return format_double(c.data.split.train) + "," + format_double(c.data.split.val) + "," +
                                format_double(c.data.split.test);
                       }};

    t["gvae.hidden"] = int_field(&C::gvae, &GvaeConfig::hidden);
    t["gvae.latent"] = int_field(&C::gvae, &GvaeConfig::latent);
    t["gvae.epochs"] = int_field(&C::gvae, &GvaeConfig::epochs);
    t["gvae.learning_rate"] = real_field(&C::gvae, &GvaeConfig::learning_rate);

    t["map.alpha"] = real_field(&C::map, &MapGraphConfig::alpha);
    t["map.beta"] = real_field(&C::map, &MapGraphConfig::beta);
    t["map.max_iters"] = int_field(&C::map, &MapGraphConfig::max_iters);
    t["map.tol"] = real_field(&C::map, &MapGraphConfig::tol);
    t["map.fixed_step"] = real_field(&C::map, &MapGraphConfig::fixed_step);
    t["map.normalize_distances"] = bool_field(&C::map, &MapGraphConfig::normalize_distances);
    t["map.step_rule"] = {[](C& c, const std::string& v) {
                            const std::string s = trim(v);
                            if (s == "fixed") c.map.step_rule = StepRule::fixed;
                            else if (s == "backtracking") c.map.step_rule = StepRule::backtracking;
                            else bad_value("map.step_rule", v, "fixed or backtracking");
                          },
                          [](const C& c) {
                            return std::string(c.map.step_rule == StepRule::fixed ? "fixed" : "backtracking");
                          }};

    t["model.layers"] = {[](C& c, const std::string& v) {
                           const auto n = to_integer("model.layers", v);
                           if (n < 1) bad_value("model.layers", v, "a positive integer");
                           c.model.layers = static_cast<int>(n);
                           if (static_cast<long long>(c.model.dilations.size()) != n) {
                             c.model.dilations.clear();
                             for (long long l = 0; l < n; ++l) c.model.dilations.push_back(l % 2 ? 2 : 1);
                           }
                         },
                         [](const C& c) { return std::to_string(c.model.layers); }};
    t["model.dilations"] = {[](C& c, const std::string& v) {
                              std::vector<int> d;
                              for (const auto& item : to_list(v)) d.push_back(static_cast<int>(to_integer("model.dilations", item)));
                              if (d.empty()) bad_value("model.dilations", v, "a comma-separated list of integers");
                              c.model.dilations = d;
                              c.model.layers = static_cast<int>(d.size());
                            },
                            [](const C& c) {
                              std::vector<std::string> s;
                              for (int d : c.model.dilations) s.push_back(std::to_string(d));
                              return join(s);
                            }};
    t["model.kernel_size"] = int_field(&C::model, &BackboneConfig::kernel_size);
    t["model.residual_channels"] = int_field(&C::model, &BackboneConfig::residual_channels);
    t["model.skip_channels"] = int_field(&C::model, &BackboneConfig::skip_channels);
    t["model.end_channels"] = int_field(&C::model, &BackboneConfig::end_channels);
    t["model.t_in"] = int_field(&C::model, &BackboneConfig::t_in);
    t["model.horizon"] = int_field(&C::model, &BackboneConfig::horizon);
    t["model.dropout_rate"] = real_field(&C::model, &BackboneConfig::dropout_rate);
    t["model.learn_phi"] = bool_field(&C::model, &BackboneConfig::learn_phi);
    t["model.phi_init"] = real_field(&C::model, &BackboneConfig::phi_init);
    t["model.adaptive_dim"] = int_field(&C::model, &BackboneConfig::adaptive_dim);
    t["model.graph_mode"] = {[](C& c, const std::string& v) { c.model.graph_mode = parse_graph_mode(trim(v)); },
                             [](const C& c) { return std::string(to_string(c.model.graph_mode)); }};
    t["model.skip_source"] = {[](C& c, const std::string& v) { c.model.skip_source = parse_skip_source(trim(v)); },
                              [](const C& c) { return std::string(to_string(c.model.skip_source)); }};

    t["train.epochs"] = int_field(&C::train, &TrainConfig::epochs);
    t["train.batch_size"] = int_field(&C::train, &TrainConfig::batch_size);
    t["train.lr_init"] = real_field(&C::train, &TrainConfig::lr_init);
    t["train.lr_drop_epoch"] = int_field(&C::train, &TrainConfig::lr_drop_epoch);
    t["train.lr_after"] = real_field(&C::train, &TrainConfig::lr_after);
    t["train.grad_clip"] = real_field(&C::train, &TrainConfig::grad_clip);
    t["train.max_batches_per_epoch"] = int_field(&C::train, &TrainConfig::max_batches_per_epoch);
    t["train.eval_mc_samples"] = int_field(&C::train, &TrainConfig::eval_mc_samples);
    t["train.mask_zero"] = bool_field(&C::train, &TrainConfig::mask_zero);
    t["train.freeze"] = bool_field(&C::train, &TrainConfig::freeze);
    t["train.graph_sample_scope"] = {
        [](C& c, const std::string& v) { c.train.graph_sample_scope = parse_sample_scope(trim(v)); },
        [](const C& c) { return std::string(to_string(c.train.graph_sample_scope)); }};
    return t;
  }();
  return table;
}

const Field& field(const std::string& key) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw UsageError("unknown config key '" + key + "'");
  return it->second;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (data.features.empty()) throw UsageError("data.features must name at least one feature");
  if (!(data.epsilon >= 0 && data.epsilon < 1)) throw UsageError("data.epsilon must lie in [0, 1)");
  if (!(data.split.train > 0) || data.split.val < 0 || data.split.test < 0)
    throw UsageError("data.split ratios must be nonnegative with a positive training share");
  gvae.validate();
  map.validate();
  BackboneConfig m = model;
  m.num_nodes = std::max<Index>(m.num_nodes, 1);
  m.features_in = m.features_out = static_cast<int>(data.features.size());
  m.validate();
  train.validate();
}

std::uint64_t ExperimentConfig::gvae_seed() const { return Rng(seed).split(1).seed(); }
std::uint64_t ExperimentConfig::model_seed() const { return Rng(seed).split(2).seed(); }
std::uint64_t ExperimentConfig::train_seed() const { return Rng(seed).split(3).seed(); }

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  try {
    field(key).set(config, value);
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    // Helpers report an empty key name; fill it in.
    if (msg.rfind("config key '':", 0) == 0) throw UsageError("config key '" + key + "':" + msg.substr(14));
    throw;
  }
}

std::string get_config_value(const ExperimentConfig& config, const std::string& key) {
  return field(key).get(config);
}

void apply_config_text(ExperimentConfig& config, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw UsageError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    try {
      set_config_value(config, key, trim(body.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig config;
  apply_config_text(config, buffer.str(), path.string());
  return config;
}

std::string env_var_name(const std::string& key) {
  std::string out = "BGCN_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void apply_env_overrides(ExperimentConfig& config) {
  for (const auto& key : config_keys()) {
    const std::string name = env_var_name(key);
    if (const char* value = std::getenv(name.c_str())) {
      try {
        set_config_value(config, key, value);
      } catch (const UsageError& e) {
        throw UsageError(name + ": " + e.what());
      }
    }
  }
}

std::string dump_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& key : config_keys()) out += key + " = " + get_config_value(config, key) + "\n";
  return out;
}

}  // namespace bgcn
