#pragma once

// Reader and writer for the line-oriented `.dpomdp` problem format.
//
//   agents: <n | names...>        discount: <f>        values: reward
//   states: <k | names...>        start: <p...> | uniform   (same or next line)
//   actions:      one line per agent, <k | names...>
//   observations: one line per agent, <k | names...>
//   T: <ja> : <s> : <s'> : <p>
//   O: <ja> : <s'> : <jo> : <p>
//   R: <ja> : <s> : <s'> : <jo> : <r>
//
// `<ja>`/`<jo>` are either a single `*` or one name/index per agent (each may be
// `*`). Later entries overwrite earlier ones. Also accepted: `T: <ja> :` followed
// by `uniform`/`identity`, `T: <ja> : <s> :` followed by a row, and the
// analogous `O:` forms.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gmaa/errors.hpp"
#include "gmaa/model.hpp"

namespace gmaa {

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::vector<std::string> split_colon(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ':') {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::optional<double> to_number(const std::string& tok) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

inline std::optional<int> to_count(const std::string& tok) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

class DpomdpParser {
 public:
  DpomdpParser(std::string_view text, int horizon) : horizon_(horizon) {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      lines_.push_back(trim(line));
    }
  }

  DecPomdpModel parse() {
    while (next_nonempty()) {
      const std::string line = lines_[pos_];
      const int lineno = static_cast<int>(pos_) + 1;
      ++pos_;
      const auto colon = line.find(':');
      if (colon == std::string::npos) throw ParseError(lineno, "expected '<keyword>:'");
      const std::string key = trim(std::string_view(line).substr(0, colon));
      const std::string rest = trim(std::string_view(line).substr(colon + 1));
      if (key == "agents") parse_agents(rest, lineno);
      else if (key == "discount") parse_discount(rest, lineno);
      else if (key == "values") parse_values(rest, lineno);
      else if (key == "states") parse_states(rest, lineno);
      else if (key == "start") parse_start(rest, lineno);
      else if (key == "actions") parse_sets(actions_, "actions", lineno);
      else if (key == "observations") parse_sets(observations_, "observations", lineno);
      else if (key == "T") parse_t(line.substr(colon + 1), lineno);
      else if (key == "O") parse_o(line.substr(colon + 1), lineno);
      else if (key == "R") parse_r(line.substr(colon + 1), lineno);
      else throw ParseError(lineno, "unknown keyword '" + key + "'");
    }
    return finish();
  }

 private:
  bool next_nonempty() {
    while (pos_ < lines_.size() && lines_[pos_].empty()) ++pos_;
    return pos_ < lines_.size();
  }

  std::vector<std::string> take_data_line(int lineno, const std::string& what) {
    if (!next_nonempty()) throw ParseError(lineno, "expected " + what + " after this line");
    return split_ws(lines_[pos_++]);
  }

  static std::vector<std::string> names_or_count(const std::vector<std::string>& toks, const std::string& prefix,
                                                 int lineno) {
    if (toks.size() == 1) {
      if (auto k = to_count(toks[0])) {
        if (*k < 1) throw ParseError(lineno, "count must be >= 1");
        std::vector<std::string> names;
        for (int i = 0; i < *k; ++i) names.push_back(prefix + std::to_string(i));
        return names;
      }
    }
    if (toks.empty()) throw ParseError(lineno, "expected a count or a list of names");
    return toks;
  }

  void parse_agents(const std::string& rest, int lineno) {
    auto toks = split_ws(rest);
    auto names = names_or_count(toks, "agent", lineno);
    num_agents_ = static_cast<int>(names.size());
  }

  void parse_discount(const std::string& rest, int lineno) {
    auto v = to_number(rest);
    if (!v) throw ParseError(lineno, "bad discount");
    discount_ = *v;
  }

  void parse_values(const std::string& rest, int lineno) {
    if (rest != "reward") throw ParseError(lineno, "only 'values: reward' is supported");
  }

  void parse_states(const std::string& rest, int lineno) {
    auto toks = split_ws(rest);
    if (toks.empty()) toks = take_data_line(lineno, "states");
    states_ = names_or_count(toks, "s", lineno);
    state_index_.clear();
    for (std::size_t i = 0; i < states_.size(); ++i) state_index_[states_[i]] = static_cast<int>(i);
  }

  void parse_start(const std::string& rest, int lineno) {
    auto toks = split_ws(rest);
    if (toks.empty()) toks = take_data_line(lineno, "start distribution");
    start_line_ = lineno;
    if (toks.size() == 1 && toks[0] == "uniform") {
      start_uniform_ = true;
      return;
    }
    start_.clear();
    for (const auto& t : toks) {
      auto v = to_number(t);
      if (!v) throw ParseError(lineno, "bad start probability '" + t + "'");
      start_.push_back(*v);
    }
  }

  void parse_sets(std::vector<std::vector<std::string>>& target, const std::string& what, int lineno) {
    if (num_agents_ < 1) throw ParseError(lineno, "'agents:' must precede '" + what + ":'");
    target.clear();
    for (int i = 0; i < num_agents_; ++i) {
      auto toks = take_data_line(lineno, what + " for agent " + std::to_string(i));
      target.push_back(names_or_count(toks, what.substr(0, 1) + std::to_string(i) + "_", lineno));
    }
  }

  void require_header(int lineno) {
    if (num_agents_ < 1 || states_.empty() || actions_.empty() || observations_.empty())
      throw ParseError(lineno, "agents, states, actions and observations must be declared before entries");
    if (!tensors_ready_) {
      std::vector<int> a_sizes, o_sizes;
      for (const auto& a : actions_) a_sizes.push_back(static_cast<int>(a.size()));
      for (const auto& o : observations_) o_sizes.push_back(static_cast<int>(o.size()));
      ja_ = JointIndex(a_sizes);
      jo_ = JointIndex(o_sizes);
      const std::size_t ns = states_.size();
      transition_.assign(ns * ja_.count() * ns, 0.0);
      observation_.assign(static_cast<std::size_t>(ja_.count()) * ns * jo_.count(), 0.0);
      reward_.assign(ns * ja_.count(), 0.0);
      t_row_line_.assign(ns * ja_.count(), 0);
      o_row_line_.assign(static_cast<std::size_t>(ja_.count()) * ns, 0);
      tensors_ready_ = true;
    }
  }

  std::vector<int> match_state(const std::string& tok, int lineno) const {
    std::vector<int> out;
    if (tok == "*") {
      for (int s = 0; s < static_cast<int>(states_.size()); ++s) out.push_back(s);
      return out;
    }
    if (auto it = state_index_.find(tok); it != state_index_.end()) return {it->second};
    if (auto k = to_count(tok); k && *k >= 0 && *k < static_cast<int>(states_.size())) return {*k};
    throw ParseError(lineno, "unknown state '" + tok + "'");
  }

  static std::vector<int> match_member(const std::vector<std::string>& names, const std::string& tok,
                                       const std::string& what, int lineno) {
    std::vector<int> out;
    if (tok == "*") {
      for (int i = 0; i < static_cast<int>(names.size()); ++i) out.push_back(i);
      return out;
    }
    for (int i = 0; i < static_cast<int>(names.size()); ++i)
      if (names[i] == tok) return {i};
    if (auto k = to_count(tok); k && *k >= 0 && *k < static_cast<int>(names.size())) return {*k};
    throw ParseError(lineno, "unknown " + what + " '" + tok + "'");
  }

  // Expands a joint action/observation field into the matching joint indices.
  std::vector<int> match_joint(const std::string& field, const std::vector<std::vector<std::string>>& sets,
                               const JointIndex& index, const std::string& what, int lineno) const {
    auto toks = split_ws(field);
    std::vector<int> out;
    if (toks.size() == 1 && toks[0] == "*") {
      for (int j = 0; j < index.count(); ++j) out.push_back(j);
      return out;
    }
    if (toks.size() == 1 && num_agents_ > 1) {
      // A single integer addresses the joint index directly.
      if (auto k = to_count(toks[0]); k && *k >= 0 && *k < index.count()) return {*k};
    }
    if (static_cast<int>(toks.size()) != num_agents_)
      throw ParseError(lineno, "expected " + std::to_string(num_agents_) + " " + what + " components");
    std::vector<std::vector<int>> choices;
    for (int i = 0; i < num_agents_; ++i) choices.push_back(match_member(sets[i], toks[i], what, lineno));
    std::vector<int> parts(num_agents_, 0);
    std::vector<std::size_t> cursor(num_agents_, 0);
    while (true) {
      for (int i = 0; i < num_agents_; ++i) parts[i] = choices[i][cursor[i]];
      out.push_back(index.encode(parts));
      int i = num_agents_ - 1;
      while (i >= 0 && ++cursor[i] == choices[i].size()) cursor[i--] = 0;
      if (i < 0) break;
    }
    return out;
  }

  double parse_value(const std::string& tok, int lineno, bool probability) const {
    auto v = to_number(tok);
    if (!v) throw ParseError(lineno, "bad number '" + tok + "'");
    if (probability && (*v < 0.0 || *v > 1.0 + 1e-6)) throw ParseError(lineno, "probability out of range");
    return *v;
  }

  std::size_t t_at(int s, int a, int s2) const {
    return (static_cast<std::size_t>(s) * ja_.count() + a) * states_.size() + s2;
  }
  std::size_t o_at(int a, int s2, int o) const {
    return (static_cast<std::size_t>(a) * states_.size() + s2) * jo_.count() + o;
  }

  std::vector<double> read_row(int lineno, std::size_t n, const std::string& what) {
    auto toks = take_data_line(lineno, what);
    std::vector<double> row;
    if (toks.size() == 1 && toks[0] == "uniform") return std::vector<double>(n, 1.0 / static_cast<double>(n));
    if (toks.size() != n) throw ParseError(lineno + 1, "expected " + std::to_string(n) + " probabilities");
    for (const auto& t : toks) row.push_back(parse_value(t, lineno + 1, true));
    return row;
  }

  void parse_t(const std::string& body, int lineno) {
    require_header(lineno);
    auto f = split_colon(body);
    const int ns = static_cast<int>(states_.size());
    if (f.size() == 4) {
      const double p = parse_value(f[3], lineno, true);
      for (int a : match_joint(f[0], actions_, ja_, "action", lineno))
        for (int s : match_state(f[1], lineno))
          for (int s2 : match_state(f[2], lineno)) {
            transition_[t_at(s, a, s2)] = p;
            t_row_line_[static_cast<std::size_t>(s) * ja_.count() + a] = lineno;
          }
    } else if (f.size() == 3 && f[2].empty()) {
      auto row = read_row(lineno, static_cast<std::size_t>(ns), "transition row");
      for (int a : match_joint(f[0], actions_, ja_, "action", lineno))
        for (int s : match_state(f[1], lineno)) {
          for (int s2 = 0; s2 < ns; ++s2) transition_[t_at(s, a, s2)] = row[s2];
          t_row_line_[static_cast<std::size_t>(s) * ja_.count() + a] = lineno;
        }
    } else if (f.size() == 2 && f[1].empty()) {
      auto toks = take_data_line(lineno, "'uniform' or 'identity'");
      if (toks.size() != 1 || (toks[0] != "uniform" && toks[0] != "identity"))
        throw ParseError(lineno + 1, "only 'uniform' and 'identity' transition blocks are supported");
      const bool identity = toks[0] == "identity";
      for (int a : match_joint(f[0], actions_, ja_, "action", lineno))
        for (int s = 0; s < ns; ++s) {
          for (int s2 = 0; s2 < ns; ++s2)
            transition_[t_at(s, a, s2)] = identity ? (s == s2 ? 1.0 : 0.0) : 1.0 / ns;
          t_row_line_[static_cast<std::size_t>(s) * ja_.count() + a] = lineno;
        }
    } else {
      throw ParseError(lineno, "malformed T entry");
    }
  }

  void parse_o(const std::string& body, int lineno) {
    require_header(lineno);
    auto f = split_colon(body);
    const int ns = static_cast<int>(states_.size());
    const int no = jo_.count();
    if (f.size() == 4) {
      const double p = parse_value(f[3], lineno, true);
      for (int a : match_joint(f[0], actions_, ja_, "action", lineno))
        for (int s2 : match_state(f[1], lineno))
          for (int o : match_joint(f[2], observations_, jo_, "observation", lineno)) {
            observation_[o_at(a, s2, o)] = p;
            o_row_line_[static_cast<std::size_t>(a) * ns + s2] = lineno;
          }
    } else if (f.size() == 3 && f[2].empty()) {
      auto row = read_row(lineno, static_cast<std::size_t>(no), "observation row");
      for (int a : match_joint(f[0], actions_, ja_, "action", lineno))
        for (int s2 : match_state(f[1], lineno)) {
          for (int o = 0; o < no; ++o) observation_[o_at(a, s2, o)] = row[o];
          o_row_line_[static_cast<std::size_t>(a) * ns + s2] = lineno;
        }
    } else if (f.size() == 2 && f[1].empty()) {
      auto toks = take_data_line(lineno, "'uniform'");
      if (toks.size() != 1 || toks[0] != "uniform")
        throw ParseError(lineno + 1, "only 'uniform' observation blocks are supported");
      for (int a : match_joint(f[0], actions_, ja_, "action", lineno))
        for (int s2 = 0; s2 < ns; ++s2) {
          for (int o = 0; o < no; ++o) observation_[o_at(a, s2, o)] = 1.0 / no;
          o_row_line_[static_cast<std::size_t>(a) * ns + s2] = lineno;
        }
    } else {
      throw ParseError(lineno, "malformed O entry");
    }
  }

  void parse_r(const std::string& body, int lineno) {
    require_header(lineno);
    auto f = split_colon(body);
    if (f.size() != 5) throw ParseError(lineno, "malformed R entry (expected 'R: ja : s : s' : jo : r')");
    const double r = parse_value(f[4], lineno, false);
    const auto ja_list = match_joint(f[0], actions_, ja_, "action", lineno);
    const auto s_list = match_state(f[1], lineno);
    const bool marginal = split_ws(f[2]) == std::vector<std::string>{"*"} &&
                          split_ws(f[3]) == std::vector<std::string>{"*"};
    if (marginal && !detailed_) {
      for (int a : ja_list)
        for (int s : s_list) reward_[static_cast<std::size_t>(s) * ja_.count() + a] = r;
      return;
    }
    ensure_detailed();
    for (int a : ja_list)
      for (int s : s_list)
        for (int s2 : match_state(f[2], lineno))
          for (int o : match_joint(f[3], observations_, jo_, "observation", lineno)) detailed_at(s, a, s2, o) = r;
  }

  double& detailed_at(int s, int a, int s2, int o) {
    const std::size_t ns = states_.size();
    return detailed_reward_[((static_cast<std::size_t>(s) * ja_.count() + a) * ns + s2) * jo_.count() + o];
  }

  // Switches to a reward table over (s, a, s', o) once an entry names a
  // specific s' or o; the marginal R(s, a) is taken after parsing.
  void ensure_detailed() {
    if (detailed_) return;
    detailed_ = true;
    const int ns = static_cast<int>(states_.size());
    detailed_reward_.assign(static_cast<std::size_t>(ns) * ja_.count() * ns * jo_.count(), 0.0);
    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < ja_.count(); ++a)
        for (int s2 = 0; s2 < ns; ++s2)
          for (int o = 0; o < jo_.count(); ++o)
            detailed_at(s, a, s2, o) = reward_[static_cast<std::size_t>(s) * ja_.count() + a];
  }

  DecPomdpModel finish() {
    const int last = static_cast<int>(lines_.size());
    if (num_agents_ < 1) throw ParseError(last, "missing 'agents:'");
    if (states_.empty()) throw ParseError(last, "missing 'states:'");
    if (actions_.empty()) throw ParseError(last, "missing 'actions:'");
    if (observations_.empty()) throw ParseError(last, "missing 'observations:'");
    require_header(last);
    const int ns = static_cast<int>(states_.size());

    std::vector<double> start;
    if (start_uniform_ || (start_.empty() && start_line_ == 0)) {
      start.assign(ns, 1.0 / ns);
    } else {
      if (static_cast<int>(start_.size()) != ns)
        throw ParseError(start_line_, "start distribution needs " + std::to_string(ns) + " entries");
      start = start_;
      normalize(start, start_line_, "start distribution");
    }

    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < ja_.count(); ++a) {
        std::vector<double> row(ns);
        for (int s2 = 0; s2 < ns; ++s2) row[s2] = transition_[t_at(s, a, s2)];
        normalize(row, t_row_line_[static_cast<std::size_t>(s) * ja_.count() + a],
                  "transition row for state '" + states_[s] + "', joint action " + std::to_string(a));
        for (int s2 = 0; s2 < ns; ++s2) transition_[t_at(s, a, s2)] = row[s2];
      }
    for (int a = 0; a < ja_.count(); ++a)
      for (int s2 = 0; s2 < ns; ++s2) {
        std::vector<double> row(jo_.count());
        for (int o = 0; o < jo_.count(); ++o) row[o] = observation_[o_at(a, s2, o)];
        normalize(row, o_row_line_[static_cast<std::size_t>(a) * ns + s2],
                  "observation row for joint action " + std::to_string(a) + ", state '" + states_[s2] + "'");
        for (int o = 0; o < jo_.count(); ++o) observation_[o_at(a, s2, o)] = row[o];
      }

    if (detailed_) {
      for (int s = 0; s < ns; ++s)
        for (int a = 0; a < ja_.count(); ++a) {
          double r = 0.0;
          for (int s2 = 0; s2 < ns; ++s2)
            for (int o = 0; o < jo_.count(); ++o)
              r += transition_[t_at(s, a, s2)] * observation_[o_at(a, s2, o)] * detailed_at(s, a, s2, o);
          reward_[static_cast<std::size_t>(s) * ja_.count() + a] = r;
        }
    }

    DecPomdpModel::Definition def;
    def.states = states_;
    def.actions = actions_;
    def.observations = observations_;
    def.transition = transition_;
    def.observation = observation_;
    def.reward = reward_;
    def.initial_belief = start;
    def.horizon = horizon_;
    def.discount = discount_;
    return DecPomdpModel(std::move(def));
  }

  // Rows within 1e-6 of summing to one are renormalized; larger deviations are errors.
  // Rows already exact up to rounding are kept bit-for-bit so serialization round-trips.
  static void normalize(std::vector<double>& row, int lineno, const std::string& what) {
    double sum = 0.0;
    for (double p : row) sum += p;
    if (std::abs(sum - 1.0) > 1e-6) {
      std::ostringstream msg;
      msg << what << " sums to " << sum << ", not 1";
      throw ParseError(lineno, msg.str());
    }
    if (std::abs(sum - 1.0) <= 1e-12) return;
    for (double& p : row) p /= sum;
  }

  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
  int horizon_;
  int num_agents_ = 0;
  double discount_ = 1.0;
  std::vector<std::string> states_;
  std::map<std::string, int> state_index_;
  std::vector<std::vector<std::string>> actions_;
  std::vector<std::vector<std::string>> observations_;
  std::vector<double> start_;
  bool start_uniform_ = false;
  int start_line_ = 0;
  bool tensors_ready_ = false;
  JointIndex ja_;
  JointIndex jo_;
  std::vector<double> transition_;
  std::vector<double> observation_;
  std::vector<double> reward_;
  std::vector<int> t_row_line_;
  std::vector<int> o_row_line_;
  bool detailed_ = false;
  std::vector<double> detailed_reward_;
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace detail

/// Parses `.dpomdp` text. The file carries no horizon; `horizon` is attached to the model.
inline DecPomdpModel parse_dpomdp(std::string_view text, int horizon = 1) {
  return detail::DpomdpParser(text, horizon).parse();
}

inline DecPomdpModel load_dpomdp(const std::string& path, int horizon = 1) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_dpomdp(text, horizon);
}

/// Writes the model back in single-entry form; parsing the output reproduces
/// every tensor exactly.
inline std::string serialize_dpomdp(const DecPomdpModel& m) {
  using detail::format_double;
  using detail::join;
  std::ostringstream out;
  out << "agents: " << m.num_agents() << "\n";
  out << "discount: " << format_double(m.discount()) << "\n";
  out << "values: reward\n";
  out << "states: " << join(m.state_names(), " ") << "\n";
  out << "start:\n";
  for (int s = 0; s < m.num_states(); ++s) out << (s ? " " : "") << format_double(m.initial_belief()[s]);
  out << "\nactions:\n";
  for (int i = 0; i < m.num_agents(); ++i) out << join(m.action_names(i), " ") << "\n";
  out << "observations:\n";
  for (int i = 0; i < m.num_agents(); ++i) out << join(m.observation_names(i), " ") << "\n";

  auto joint_name = [&](int joint, const JointIndex& index, bool actions) {
    std::vector<std::string> parts;
    for (int i = 0; i < m.num_agents(); ++i) {
      const int c = index.component(joint, i);
      parts.push_back(actions ? m.action_names(i)[c] : m.observation_names(i)[c]);
    }
    return join(parts, " ");
  };

  for (int a = 0; a < m.num_joint_actions(); ++a)
    for (int s = 0; s < m.num_states(); ++s)
      for (int s2 = 0; s2 < m.num_states(); ++s2)
        if (double p = m.transition(s, a, s2); p != 0.0)
          out << "T: " << joint_name(a, m.joint_actions(), true) << " : " << m.state_names()[s] << " : "
              << m.state_names()[s2] << " : " << format_double(p) << "\n";
  for (int a = 0; a < m.num_joint_actions(); ++a)
    for (int s2 = 0; s2 < m.num_states(); ++s2)
      for (int o = 0; o < m.num_joint_observations(); ++o)
        if (double p = m.observation(a, s2, o); p != 0.0)
          out << "O: " << joint_name(a, m.joint_actions(), true) << " : " << m.state_names()[s2] << " : "
              << joint_name(o, m.joint_observations(), false) << " : " << format_double(p) << "\n";
  for (int a = 0; a < m.num_joint_actions(); ++a)
    for (int s = 0; s < m.num_states(); ++s)
      if (double r = m.reward(s, a); r != 0.0)
        out << "R: " << joint_name(a, m.joint_actions(), true) << " : " << m.state_names()[s] << " : * : * : "
            << format_double(r) << "\n";
  return out.str();
}

}  // namespace gmaa
