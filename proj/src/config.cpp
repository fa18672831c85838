#include "acdc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace acdc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: '" + key + "' expects true/false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number(T RunConfig::*member) {
  return Field{[member](RunConfig& c, const std::string& k, const std::string& v) {
                 if constexpr (std::is_floating_point_v<T>) {
                   c.*member = parse_double(k, v);
                 } else {
                   c.*member = parse_int<T>(k, v);
                 }
               },
               [member](const RunConfig& c) {
                 if constexpr (std::is_floating_point_v<T>) {
                   return fmt(c.*member);
                 } else {
                   return std::to_string(c.*member);
                 }
               }};
}

template <typename T>
Field ac_number(T curriculum::CurriculumParams::*member) {
  return Field{[member](RunConfig& c, const std::string& k, const std::string& v) {
                 if constexpr (std::is_floating_point_v<T>) {
                   c.ac.*member = parse_double(k, v);
                 } else {
                   c.ac.*member = parse_int<T>(k, v);
                 }
               },
               [member](const RunConfig& c) {
                 if constexpr (std::is_floating_point_v<T>) {
                   return fmt(c.ac.*member);
                 } else {
                   return std::to_string(c.ac.*member);
                 }
               }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"env.name", Field{[](RunConfig& c, const std::string&, const std::string& v) { c.env_name = v; },
                         [](const RunConfig& c) { return c.env_name; }}},
      {"env.epsilon", number(&RunConfig::env_epsilon)},
      {"env.horizon", number(&RunConfig::env_horizon)},
      {"replay.capacity", number(&RunConfig::replay_capacity)},
      {"her.k", number(&RunConfig::her_k)},
      {"batch_size", number(&RunConfig::batch_size)},
      {"ac.lambda0", ac_number(&curriculum::CurriculumParams::lambda0)},
      {"ac.eta_base", ac_number(&curriculum::CurriculumParams::eta_base)},
      {"ac.theta_low", ac_number(&curriculum::CurriculumParams::theta_low)},
      {"ac.theta_high", ac_number(&curriculum::CurriculumParams::theta_high)},
      {"ac.alpha_ema", ac_number(&curriculum::CurriculumParams::alpha_ema)},
      {"ac.sigma", ac_number(&curriculum::CurriculumParams::sigma)},
      {"ac.lambda_cap", ac_number(&curriculum::CurriculumParams::lambda_cap)},
      {"ac.window", ac_number(&curriculum::CurriculumParams::window)},
      {"ac.success_window", number(&RunConfig::success_window)},
      {"ac.priority_floor", number(&RunConfig::priority_floor)},
      {"dc.tau_p", number(&RunConfig::tau_p)},
      {"dc.tau_n", number(&RunConfig::tau_n)},
      {"dc.alpha_temp", number(&RunConfig::alpha_temp)},
      {"dc.beta_norm", number(&RunConfig::beta_norm)},
      {"dc.margin", number(&RunConfig::margin)},
      {"dc.z_dim", number(&RunConfig::z_dim)},
      {"dc.lstm_hidden", number(&RunConfig::lstm_hidden)},
      {"dc.lambda_embed", number(&RunConfig::lambda_embed)},
      {"dc.update_every", number(&RunConfig::update_every)},
      {"dc.key_frames", number(&RunConfig::key_frames)},
      {"dc.lr", number(&RunConfig::encoder_lr)},
      {"dc.pair_batch", number(&RunConfig::pair_batch)},
      {"dc.raw_lambda",
       Field{[](RunConfig& c, const std::string& k, const std::string& v) { c.raw_lambda = parse_bool(k, v); },
             [](const RunConfig& c) { return std::string(c.raw_lambda ? "true" : "false"); }}},
      {"agent.gamma", number(&RunConfig::gamma)},
      {"agent.tau", number(&RunConfig::tau)},
      {"agent.noise_sigma", number(&RunConfig::noise_sigma)},
      {"agent.random_eps", number(&RunConfig::random_eps)},
      {"agent.hidden", number(&RunConfig::hidden)},
      {"agent.lr_actor", number(&RunConfig::lr_actor)},
      {"agent.lr_critic", number(&RunConfig::lr_critic)},
      {"agent.action_l2", number(&RunConfig::action_l2)},
      {"seed", number(&RunConfig::seed)},
      {"epochs", number(&RunConfig::epochs)},
      {"cycles_per_epoch", number(&RunConfig::cycles_per_epoch)},
      {"episodes_per_cycle", number(&RunConfig::episodes_per_cycle)},
      {"updates_per_cycle", number(&RunConfig::updates_per_cycle)},
      {"eval_episodes", number(&RunConfig::eval_episodes)},
      {"workers", number(&RunConfig::workers)},
      {"checkpoint_every", number(&RunConfig::checkpoint_every)},
      {"mode", Field{[](RunConfig& c, const std::string&, const std::string& v) { c.mode = ModeSpec::parse(v); },
                     [](const RunConfig& c) { return c.mode.to_string(); }}},
  };
  return table;
}

}  // namespace

ModeSpec ModeSpec::parse(const std::string& text) {
  const std::string t = trim(text);
  ModeSpec m;
  if (t == "acdc") m.mode = Mode::acdc;
  else if (t == "her_uniform") m.mode = Mode::her_uniform;
  else if (t == "ac_only") m.mode = Mode::ac_only;
  else if (t == "ac_d_only") m.mode = Mode::ac_d_only;
  else if (t == "ac_q_only") m.mode = Mode::ac_q_only;
  else if (t.starts_with("fixed_lambda(") && t.ends_with(")")) {
    m.mode = Mode::fixed_lambda;
    m.fixed_lambda = parse_double("mode", t.substr(13, t.size() - 14));
    if (!(m.fixed_lambda >= 0.0)) throw std::invalid_argument("mode: fixed lambda must be >= 0");
  } else {
    throw std::invalid_argument("unknown mode '" + t + "'");
  }
  return m;
}

std::string ModeSpec::to_string() const {
  switch (mode) {
    case Mode::acdc: return "acdc";
    case Mode::her_uniform: return "her_uniform";
    case Mode::ac_only: return "ac_only";
    case Mode::ac_d_only: return "ac_d_only";
    case Mode::ac_q_only: return "ac_q_only";
    case Mode::fixed_lambda: return "fixed_lambda(" + fmt(fixed_lambda) + ")";
  }
  return "?";
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = fields();
  auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  return out;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : to_map()) os << k << " = " << v << '\n';
  return os.str();
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::validate() const {
  ac.validate();
  if (env_name != "point_push" && env_name != "reacher2") {
    throw std::invalid_argument("config: env.name must be point_push or reacher2, got '" + env_name + "'");
  }
  const auto positive = [](int v, const char* name) {
    if (v <= 0) throw std::invalid_argument(std::string("config: ") + name + " must be positive");
  };
  positive(replay_capacity, "replay.capacity");
  positive(batch_size, "batch_size");
  positive(success_window, "ac.success_window");
  positive(epochs, "epochs");
  positive(cycles_per_epoch, "cycles_per_epoch");
  positive(episodes_per_cycle, "episodes_per_cycle");
  positive(updates_per_cycle, "updates_per_cycle");
  positive(eval_episodes, "eval_episodes");
  positive(workers, "workers");
  positive(update_every, "dc.update_every");
  positive(checkpoint_every, "checkpoint_every");
  if (pair_batch < 0) throw std::invalid_argument("config: dc.pair_batch must be >= 0");
  if (her_k < 0) throw std::invalid_argument("config: her.k must be >= 0");
  if (!(tau_p > 0.0 && tau_n > 0.0 && tau_p + tau_n <= 1.0)) {
    throw std::invalid_argument("config: need tau_p, tau_n > 0 and tau_p + tau_n <= 1");
  }
  if (!(priority_floor > 0.0)) throw std::invalid_argument("config: ac.priority_floor must be > 0");
  encoder_config(2).validate();
  agent_config(1, 1, 1, 1.0).validate();
}

contrastive::EncoderConfig RunConfig::encoder_config(int goal_dim) const {
  contrastive::EncoderConfig c;
  c.goal_dim = goal_dim;
  c.lstm_hidden = lstm_hidden;
  c.lambda_embed = lambda_embed;
  c.z_dim = z_dim;
  c.key_frames = key_frames;
  c.raw_lambda = raw_lambda;
  c.alpha_temp = alpha_temp;
  c.beta_norm = beta_norm;
  c.margin = margin;
  c.learning_rate = encoder_lr;
  return c;
}

agent::AgentConfig RunConfig::agent_config(int state_dim, int goal_dim, int action_dim,
                                           double action_bound) const {
  agent::AgentConfig c;
  c.state_dim = state_dim;
  c.goal_dim = goal_dim;
  c.action_dim = action_dim;
  c.action_bound = action_bound;
  c.hidden = hidden;
  c.gamma = gamma;
  c.tau = tau;
  c.noise_sigma = noise_sigma * action_bound;
  c.random_eps = random_eps;
  c.lr_actor = lr_actor;
  c.lr_critic = lr_critic;
  c.action_l2 = action_l2;
  return c;
}

}  // namespace acdc
