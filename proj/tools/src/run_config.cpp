#include "run_config.hpp"

#include <functional>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace critscene::cli {

void RunConfig::apply_seed() {
  synth.rng_seed = seed;
  model.rng_seed = seed;
}

void RunConfig::validate() const {
  try {
    synth.validate();
    model.validate();
    compile.bands.validate();
    if (!(compile.frame_interval > 0.0)) throw std::invalid_argument("frame_interval must be positive");
    playback.validate();
    for (const auto& [name, p] : policies) p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

const EgoPolicy& RunConfig::policy(const std::string& name) const {
  const auto it = policies.find(name);
  if (it == policies.end()) throw ConfigError("unknown policy '" + name + "'");
  return it->second;
}

namespace {

using Setter = std::function<void(const std::string&)>;

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": '" + v + "' is not a number");
  return d;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": '" + v + "' is not an integer");
  return n;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    out.push_back(a == std::string::npos ? "" : item.substr(a, b - a + 1));
  }
  return out;
}

template <std::size_t N>
void to_weights(const std::string& key, const std::string& v, std::array<double, N>& out) {
  const auto items = split_list(v);
  if (items.size() != N) {
    throw ConfigError(key + " needs " + std::to_string(N) + " comma-separated values");
  }
  for (std::size_t i = 0; i < N; ++i) out[i] = to_double(key, items[i]);
}

std::vector<std::size_t> to_dims(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(v)) out.push_back(to_size(key, s));
  return out;
}

std::map<std::string, Setter> setters(RunConfig& c) {
  std::map<std::string, Setter> m;
  const auto dbl = [&m](const std::string& k, double& ref) {
    m[k] = [k, &ref](const std::string& v) { ref = to_double(k, v); };
  };
  const auto boolean = [&m](const std::string& k, bool& ref) {
    m[k] = [k, &ref](const std::string& v) { ref = to_bool(k, v); };
  };
  const auto size = [&m](const std::string& k, std::size_t& ref) {
    m[k] = [k, &ref](const std::string& v) { ref = to_size(k, v); };
  };
  const auto dims = [&m](const std::string& k, std::vector<std::size_t>& ref) {
    m[k] = [k, &ref](const std::string& v) { ref = to_dims(k, v); };
  };

  m["general.out_dir"] = [&c](const std::string& v) { c.out_dir = v; };
  m["general.seed"] = [&c](const std::string& v) {
    c.seed = static_cast<std::uint64_t>(to_size("general.seed", v));
  };
  m["general.threads"] = [&c](const std::string& v) {
    c.threads = static_cast<unsigned>(to_size("general.threads", v));
  };

  m["synth.n_scenarios"] = [&c](const std::string& v) {
    c.synth.n_scenarios = static_cast<int>(to_int("synth.n_scenarios", v));
  };
  m["synth.min_agents"] = [&c](const std::string& v) {
    c.synth.min_agents = static_cast<int>(to_int("synth.min_agents", v));
  };
  m["synth.max_agents"] = [&c](const std::string& v) {
    c.synth.max_agents = static_cast<int>(to_int("synth.max_agents", v));
  };
  m["synth.action_weights"] = [&c](const std::string& v) {
    to_weights("synth.action_weights", v, c.synth.action_weights);
  };
  m["synth.criticality_weights"] = [&c](const std::string& v) {
    to_weights("synth.criticality_weights", v, c.synth.criticality_weights);
  };
  m["synth.agent_class_weights"] = [&c](const std::string& v) {
    to_weights("synth.agent_class_weights", v, c.synth.agent_class_weights);
  };
  dbl("synth.traffic_light_probability", c.synth.traffic_light_probability);
  dbl("synth.jitter", c.synth.jitter);
  dbl("synth.missing_action_probability", c.synth.missing_action_probability);

  dims("model.mlp_n", c.model.mlp_n);
  dims("model.mlp_e", c.model.mlp_e);
  dims("model.mlp_tr", c.model.mlp_tr);
  dims("model.mlp_gat", c.model.mlp_gat);
  size("model.gat1_out", c.model.gat1_out);
  size("model.gat2_in", c.model.gat2_in);
  size("model.gru_hidden", c.model.gru_hidden);
  m["model.epochs"] = [&c](const std::string& v) {
    c.model.epochs = static_cast<int>(to_int("model.epochs", v));
  };
  dbl("model.threshold", c.model.threshold);
  m["model.variant"] = [&c](const std::string& v) {
    const auto e = triplet_encoder_from_string(v);
    if (!e) throw ConfigError("model.variant: unknown variant '" + v + "'");
    c.model.variant = *e;
  };
  boolean("model.positional_encoding", c.model.positional_encoding);
  boolean("model.gat_bidirectional", c.model.gat_bidirectional);
  m["model.gcn_scope"] = [&c](const std::string& v) {
    if (v == "current-tau") c.model.gcn_scope = GcnScope::CurrentTau;
    else if (v == "all") c.model.gcn_scope = GcnScope::AllCandidates;
    else throw ConfigError("model.gcn_scope must be current-tau or all");
  };
  boolean("model.gat_edge_in_message", c.model.gat.edge_in_message);
  boolean("model.gat_edge_in_logit", c.model.gat.edge_in_logit);
  dbl("model.gat_negative_slope", c.model.gat.negative_slope);
  dbl("model.lr", c.model.adam.lr);
  dbl("model.beta1", c.model.adam.beta1);
  dbl("model.beta2", c.model.adam.beta2);
  dbl("model.adam_eps", c.model.adam.eps);
  dbl("model.weight_decay", c.model.adam.weight_decay);
  dbl("model.clip", c.model.clip);

  dbl("scenario.band_near_collision", c.compile.bands.near_collision);
  dbl("scenario.band_near", c.compile.bands.near);
  dbl("scenario.band_visible", c.compile.bands.visible);
  dbl("scenario.frame_interval", c.compile.frame_interval);

  dbl("playback.dt", c.playback.dt);
  dbl("playback.horizon", c.playback.horizon);
  dbl("playback.ego_acceleration", c.playback.ego_acceleration);
  dbl("playback.actor_acceleration", c.playback.actor_acceleration);
  dbl("playback.lateral_speed", c.playback.lateral_speed);
  dbl("playback.conflict_lateral", c.playback.conflict_lateral);
  dbl("playback.collision_distance", c.playback.collision_distance);
  dbl("playback.speed_noise", c.playback.speed_noise);

  for (auto& [name, p] : c.policies) {
    dbl("policy." + name + ".target_speed", p.target_speed);
    dbl("policy." + name + ".ttc_threshold", p.ttc_threshold);
    dbl("policy." + name + ".deceleration", p.deceleration);
  }
  return m;
}

void apply_tree(const boost::property_tree::ptree& tree, RunConfig& cfg) {
  auto table = setters(cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("key '" + section + "' must live inside a section");
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError("unknown config key '" + full + "'");
      it->second(node.get_value<std::string>());
    }
  }
}

}  // namespace

void load_config_file(const std::string& path, RunConfig& cfg) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot read config: " + std::string(e.what()));
  }
  apply_tree(tree, cfg);
}

void load_config_text(const std::string& text, RunConfig& cfg) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot parse config: " + std::string(e.what()));
  }
  apply_tree(tree, cfg);
}

}  // namespace critscene::cli
