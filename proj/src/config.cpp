#include "qdgen/config.hpp"

#include "qdgen/hashing.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace qdgen {

using nlohmann::json;

namespace {

using Section = std::map<std::string, std::string>;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

// Reads typed values from the parsed sections, collecting every problem.
class Reader {
 public:
  Reader(std::map<std::string, Section> sections, std::filesystem::path base)
      : sections_(std::move(sections)), base_(std::move(base)) {}

  bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  }

  void error(const std::string& section, const std::string& key, const std::string& message) {
    errors_.push_back(section + "." + key + ": " + message);
  }

  template <typename T>
  void integer(const std::string& section, const std::string& key, T& out) {
    auto v = raw(section, key);
    if (!v) return;
    T parsed{};
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
      error(section, key, "expected a non-negative integer, got '" + *v + "'");
      return;
    }
    out = parsed;
  }

  void real(const std::string& section, const std::string& key, double& out) {
    auto v = raw(section, key);
    if (!v) return;
    try {
      std::size_t used = 0;
      double parsed = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing text");
      out = parsed;
    } catch (const std::exception&) {
      error(section, key, "expected a number, got '" + *v + "'");
    }
  }

  void boolean(const std::string& section, const std::string& key, bool& out) {
    auto v = raw(section, key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes") {
      out = true;
    } else if (*v == "false" || *v == "0" || *v == "no") {
      out = false;
    } else {
      error(section, key, "expected true or false, got '" + *v + "'");
    }
  }

  void text(const std::string& section, const std::string& key, std::string& out) {
    if (auto v = raw(section, key)) out = *v;
  }

  std::optional<std::filesystem::path> path(const std::string& section, const std::string& key) {
    auto v = raw(section, key);
    if (!v || v->empty()) return std::nullopt;
    std::filesystem::path p(*v);
    return p.is_absolute() ? p : base_ / p;
  }

  template <typename T, typename Parse>
  void choice(const std::string& section, const std::string& key, T& out, Parse parse,
              const std::string& allowed) {
    auto v = raw(section, key);
    if (!v) return;
    if (auto parsed = parse(*v)) {
      out = *parsed;
    } else {
      error(section, key, "unknown value '" + *v + "' (expected " + allowed + ")");
    }
  }

  void report_unknown_keys() {
    for (const auto& [section, keys] : sections_) {
      for (const auto& [key, value] : keys) {
        if (!used_.count(section + "." + key)) error(section, key, "unknown key");
      }
    }
  }

  std::vector<std::string>& errors() { return errors_; }

 private:
  std::map<std::string, Section> sections_;
  std::filesystem::path base_;
  std::set<std::string> used_;
  std::vector<std::string> errors_;
};

const std::set<std::string> kKnownSections = {
    "run",    "quality", "skills",  "engine",          "backend",
    "sim",    "remote",  "answer",  "prompts",         "role.generator",
    "role.student", "role.skill_classifier", "role.validity_oracle"};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void read_role(Reader& r, RoleConfig& role) {
  const std::string section = "role." + std::string(to_string(role.role));
  r.text(section, "model", role.model);
  r.real(section, "temperature", role.decode.temperature);
  r.integer(section, "max_tokens", role.decode.max_tokens);
  r.real(section, "requests_per_second", role.requests_per_second);
  if (auto stop = r.raw(section, "stop")) role.decode.stop = split_list(*stop);
}

void read_prompt(Reader& r, const std::string& key, std::string& out) {
  auto p = r.path("prompts", key);
  if (!p) return;
  try {
    out = read_template_file(*p);
  } catch (const std::exception& e) {
    r.error("prompts", key, e.what());
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& d : diagnostics) msg += "\n  " + d;
        return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError({"line " + std::to_string(e.line()) + ": " + e.message()});
  }

  std::vector<std::string> early;
  std::map<std::string, Section> sections;
  for (const auto& [name, body] : tree) {
    if (body.empty()) {
      if (!body.data().empty()) {
        early.push_back(name + ": key outside of any section");
      } else if (kKnownSections.count(name)) {
        sections[name];
      } else {
        early.push_back(name + ": unknown section");
      }
      continue;
    }
    if (!kKnownSections.count(name)) {
      early.push_back(name + ": unknown section");
      continue;
    }
    for (const auto& [key, value] : body) sections[name][key] = unquote(value.data());
  }

  Reader r(std::move(sections), base_dir);
  r.errors() = std::move(early);
  RunConfig cfg;
  EngineConfig& e = cfg.engine;
  GatewayConfig& g = cfg.gateway;

  if (auto p = r.path("run", "seeds")) {
    cfg.seeds = *p;
  } else {
    r.error("run", "seeds", "required");
  }
  if (auto p = r.path("run", "run_dir")) {
    cfg.run_dir = *p;
  } else {
    r.error("run", "run_dir", "required");
  }
  cfg.vocabulary = r.path("run", "vocabulary");
  r.integer("run", "root_seed", e.root_seed);
  r.integer("run", "rounds", e.rounds);
  r.integer("run", "workers", e.workers);
  r.integer("run", "checkpoint_every", e.checkpoint_every);

  r.real("quality", "lower", e.quality.lower);
  r.real("quality", "upper", e.quality.upper);
  r.integer("quality", "rollouts", e.quality.rollouts);

  r.integer("skills", "max_skills", e.max_skills);
  r.integer("skills", "vocabulary_size", e.vocabulary_size);
  r.choice(
      "skills", "vocabulary_mode", e.vocabulary_mode,
      [](std::string_view v) -> std::optional<VocabularyMode> {
        if (v == "bounded") return VocabularyMode::bounded;
        if (v == "unbounded") return VocabularyMode::unbounded;
        return std::nullopt;
      },
      "bounded|unbounded");

  r.integer("engine", "batch_size", e.batch_size);
  r.choice("engine", "policy", e.policy, parse_policy,
           "static_uniform|static_diverse|dynamic_uniform|dynamic_diverse");
  r.integer("engine", "working_set_cap", e.working_set_cap);
  std::size_t niche_cap = 0;
  if (r.raw("engine", "niche_cap")) {
    r.integer("engine", "niche_cap", niche_cap);
    e.niche_cap = niche_cap;
  }
  r.choice("engine", "niche_selection", e.niche_selection, parse_niche_selection,
           "uniform|max_div");
  r.integer("engine", "max_div_niches", e.max_div_niches);
  r.integer("engine", "verify_requeue", e.verify_requeue);

  r.choice(
      "backend", "kind", cfg.backend,
      [](std::string_view v) -> std::optional<BackendKind> {
        if (v == "sim") return BackendKind::sim;
        if (v == "remote") return BackendKind::remote;
        return std::nullopt;
      },
      "sim|remote");
  r.integer("backend", "verify_fanout", g.verify_fanout);
  r.integer("backend", "transport_retries", g.retry.transport_retries);
  r.integer("backend", "parse_retries", g.retry.parse_retries);
  std::int64_t ms = g.retry.initial_backoff.count();
  r.integer("backend", "initial_backoff_ms", ms);
  g.retry.initial_backoff = std::chrono::milliseconds(ms);
  ms = g.retry.max_backoff.count();
  r.integer("backend", "max_backoff_ms", ms);
  g.retry.max_backoff = std::chrono::milliseconds(ms);
  r.real("backend", "backoff_multiplier", g.retry.backoff_multiplier);

  SimConfig& s = cfg.sim;
  r.real("sim", "mutation_sd", s.mutation_sd);
  r.real("sim", "difficulty_drift", s.difficulty_drift);
  r.real("sim", "skill_swap_probability", s.skill_swap_probability);
  r.integer("sim", "skill_universe", s.skill_universe);
  r.real("sim", "invalidity_slope", s.invalidity_slope);
  r.real("sim", "malformed_mutation_rate", s.malformed_mutation_rate);
  r.real("sim", "garbled_classification_rate", s.garbled_classification_rate);
  r.real("sim", "transport_failure_rate", s.transport_failure_rate);
  r.real("sim", "oracle_unscorable_rate", s.oracle_unscorable_rate);

  r.text("remote", "base_url", cfg.remote.base_url);
  r.text("remote", "path", cfg.remote.path);
  r.text("remote", "api_key_env", cfg.remote.api_key_env);
  std::int64_t secs = cfg.remote.connect_timeout.count();
  r.integer("remote", "connect_timeout_s", secs);
  cfg.remote.connect_timeout = std::chrono::seconds(secs);
  secs = cfg.remote.read_timeout.count();
  r.integer("remote", "read_timeout_s", secs);
  cfg.remote.read_timeout = std::chrono::seconds(secs);

  r.choice("answer", "normalization", g.normalization, parse_normalization_profile,
           "standard|literal");

  read_prompt(r, "mutation", g.prompts.mutation);
  read_prompt(r, "skill_classification", g.prompts.skill_classification);
  read_prompt(r, "student", g.prompts.student);
  read_prompt(r, "validity_oracle", g.prompts.validity_oracle);

  for (auto& role : g.roles) read_role(r, role);
  // INI readers drop empty sections, so the oracle counts as configured once
  // its section has any key; "enabled = false" turns it off again.
  g.oracle_configured = r.has_section("role.validity_oracle");
  r.boolean("role.validity_oracle", "enabled", g.oracle_configured);

  if (cfg.backend == BackendKind::remote) {
    if (cfg.remote.base_url.empty()) r.error("remote", "base_url", "required for the remote backend");
    for (const auto& role : g.roles) {
      if (role.role == ModelRoleKind::validity_oracle && !g.oracle_configured) continue;
      if (role.model.empty()) {
        r.error("role." + std::string(to_string(role.role)), "model",
                "required for the remote backend");
      }
    }
  }
  if (g.verify_fanout < 1) r.error("backend", "verify_fanout", "must be >= 1");
  if (g.retry.transport_retries < 0) r.error("backend", "transport_retries", "must be >= 0");
  if (g.retry.parse_retries < 0) r.error("backend", "parse_retries", "must be >= 0");
  if (s.skill_universe < 1) r.error("sim", "skill_universe", "must be >= 1");

  try {
    e.validate();
  } catch (const std::invalid_argument& ex) {
    r.errors().push_back(std::string("engine: ") + ex.what());
  }
  r.report_unknown_keys();
  if (!r.errors().empty()) throw ConfigError(std::move(r.errors()));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path.string() + ": cannot read config file"});
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_run_config(ss.str(), path.parent_path());
  cfg.source = path;
  return cfg;
}

std::string run_fingerprint(const RunConfig& cfg, const std::string& seed_file_sha256) {
  const GatewayConfig& g = cfg.gateway;
  json roles = json::array();
  for (const auto& r : g.roles) {
    roles.push_back({{"role", to_string(r.role)},
                     {"model", r.model},
                     {"temperature", r.decode.temperature},
                     {"max_tokens", r.decode.max_tokens},
                     {"stop", r.decode.stop}});
  }
  json j = {
      {"backend", cfg.backend == BackendKind::sim ? "sim" : "remote"},
      {"roles", roles},
      {"prompts",
       {sha256_hex(g.prompts.mutation), sha256_hex(g.prompts.skill_classification),
        sha256_hex(g.prompts.student), sha256_hex(g.prompts.validity_oracle)}},
      {"normalization", to_string(g.normalization)},
      {"parse_retries", g.retry.parse_retries},
      {"seeds_sha256", seed_file_sha256},
  };
  if (cfg.backend == BackendKind::sim) {
    const SimConfig& s = cfg.sim;
    j["sim"] = {s.mutation_sd,
                s.difficulty_drift,
                s.skill_swap_probability,
                s.skill_universe,
                s.invalidity_slope,
                s.malformed_mutation_rate,
                s.garbled_classification_rate,
                s.transport_failure_rate,
                s.oracle_unscorable_rate};
  } else {
    j["remote"] = cfg.remote.base_url + cfg.remote.path;
  }
  if (cfg.vocabulary) j["vocabulary_sha256"] = sha256_file(*cfg.vocabulary);
  return j.dump();
}

std::shared_ptr<Backend> make_backend(const RunConfig& cfg) {
  if (cfg.backend == BackendKind::sim) return std::make_shared<SimBackend>(cfg.sim);
  return std::make_shared<RemoteBackend>(cfg.remote);
}

}  // namespace qdgen
