#pragma once

// JSON scenario files. Schema (all node ids are 1-based):
//
//   {
//     "graph": { "nodes": 7, "edges": [[1, 2], ...], "diameter_bound": 6 },   // bound optional
//     "gamma": 0.05 | "auto",                                                // optional, default "auto"
//     "rounds": 420,
//     "seed": 7,                                                             // optional, default 0
//     "agents": [ { "id": 1, "cost": { "kind": "quadratic", "a": 1, "b": 1 },
//                   "active": true, "x_hat": 2.5 | "random" }, ... ],        // active/x_hat optional
//     "events": [ { "round": 81, "agent": 4, "kind": "leave" },
//                 { "round": 250, "agent": 3, "kind": "join", "x_hat": "random", "cost": {...} } ],
//     "validators": { "beta": 1, "gradient_check": true }                    // optional
//   }
//
// Cost kinds: "quadratic" (a/2 (x-b)^2) and "logcosh" (a log cosh(x-b), optional "mu").

#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "opengt/errors.hpp"
#include "opengt/scenario.hpp"

namespace opengt {

namespace detail {

using nlohmann::json;

class JsonReader {
 public:
  std::vector<std::string> diags;

  void allow_only(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) return;
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, _] : obj.items())
      if (!allowed.count(k)) diags.push_back(prefix(where) + k + ": unknown field");
  }

  const json* object(const json& parent, const std::string& where, const char* key, bool required) {
    auto it = parent.find(key);
    if (it == parent.end()) {
      if (required) diags.push_back(prefix(where) + key + ": missing");
      return nullptr;
    }
    if (!it->is_object()) {
      diags.push_back(prefix(where) + key + ": expected an object");
      return nullptr;
    }
    return &*it;
  }

  const json* array(const json& parent, const std::string& where, const char* key, bool required) {
    auto it = parent.find(key);
    if (it == parent.end()) {
      if (required) diags.push_back(prefix(where) + key + ": missing");
      return nullptr;
    }
    if (!it->is_array()) {
      diags.push_back(prefix(where) + key + ": expected an array");
      return nullptr;
    }
    return &*it;
  }

  std::optional<std::uint64_t> unsigned_int(const json& parent, const std::string& where, const char* key,
                                            bool required) {
    auto it = parent.find(key);
    if (it == parent.end()) {
      if (required) diags.push_back(prefix(where) + key + ": missing");
      return std::nullopt;
    }
    if (!it->is_number_unsigned()) {
      diags.push_back(prefix(where) + key + ": expected a non-negative integer");
      return std::nullopt;
    }
    return it->get<std::uint64_t>();
  }

  std::optional<double> number(const json& parent, const std::string& where, const char* key, bool required) {
    auto it = parent.find(key);
    if (it == parent.end()) {
      if (required) diags.push_back(prefix(where) + key + ": missing");
      return std::nullopt;
    }
    if (!it->is_number()) {
      diags.push_back(prefix(where) + key + ": expected a number");
      return std::nullopt;
    }
    return it->get<double>();
  }

  // A number, or the given keyword (returned as nullopt). Absent also means the keyword.
  std::optional<double> number_or(const json& parent, const std::string& where, const char* key, const char* keyword) {
    auto it = parent.find(key);
    if (it == parent.end()) return std::nullopt;
    if (it->is_string() && it->get<std::string>() == keyword) return std::nullopt;
    if (!it->is_number()) {
      diags.push_back(prefix(where) + key + ": expected a number or \"" + keyword + "\"");
      return std::nullopt;
    }
    return it->get<double>();
  }

  std::optional<bool> boolean(const json& parent, const std::string& where, const char* key) {
    auto it = parent.find(key);
    if (it == parent.end()) return std::nullopt;
    if (!it->is_boolean()) {
      diags.push_back(prefix(where) + key + ": expected true or false");
      return std::nullopt;
    }
    return it->get<bool>();
  }

  std::optional<std::string> string(const json& parent, const std::string& where, const char* key, bool required) {
    auto it = parent.find(key);
    if (it == parent.end()) {
      if (required) diags.push_back(prefix(where) + key + ": missing");
      return std::nullopt;
    }
    if (!it->is_string()) {
      diags.push_back(prefix(where) + key + ": expected a string");
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  // 1-based id to 0-based; 0 maps to SIZE_MAX so range checks report it.
  static NodeId node(std::uint64_t one_based) {
    return one_based == 0 ? std::numeric_limits<NodeId>::max() : static_cast<NodeId>(one_based - 1);
  }

  CostSpec cost(const json& obj, const std::string& where) {
    allow_only(obj, where, {"kind", "a", "b", "mu"});
    CostSpec spec;
    if (auto k = string(obj, where, "kind", true)) spec.kind = *k;
    if (auto a = number(obj, where, "a", true)) spec.a = *a;
    if (auto b = number(obj, where, "b", true)) spec.b = *b;
    spec.mu = number(obj, where, "mu", false);
    return spec;
  }

 private:
  static std::string prefix(const std::string& where) { return where.empty() ? "" : where + "."; }
};

inline std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

// Parses without semantic validation; throws ScenarioError on syntax or type errors.
inline Scenario parse_scenario(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_and_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ScenarioError({"parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                         e.what()});
  }
  if (!doc.is_object()) throw ScenarioError({"scenario: top level must be a JSON object"});

  detail::JsonReader r;
  Scenario s;
  r.allow_only(doc, "", {"graph", "gamma", "rounds", "seed", "agents", "events", "validators"});

  if (const auto* g = r.object(doc, "", "graph", true)) {
    r.allow_only(*g, "graph", {"nodes", "edges", "diameter_bound"});
    if (auto n = r.unsigned_int(*g, "graph", "nodes", true)) s.nodes = static_cast<std::size_t>(*n);
    if (auto d = r.unsigned_int(*g, "graph", "diameter_bound", false)) s.diameter_bound = static_cast<std::size_t>(*d);
    if (const auto* edges = r.array(*g, "graph", "edges", true)) {
      for (std::size_t i = 0; i < edges->size(); ++i) {
        const auto& e = (*edges)[i];
        const bool ok = e.is_array() && e.size() == 2 && e[0].is_number_unsigned() && e[1].is_number_unsigned();
        if (!ok) {
          r.diags.push_back("graph.edges[" + std::to_string(i) + "]: expected [from, to] with positive integer ids");
          continue;
        }
        s.edges.push_back({detail::JsonReader::node(e[0].get<std::uint64_t>()),
                           detail::JsonReader::node(e[1].get<std::uint64_t>())});
      }
    }
  }

  if (auto it = doc.find("gamma"); it != doc.end() && !(it->is_string() && it->get<std::string>() == "auto")) {
    if (it->is_number()) s.gamma = it->get<double>();
    else r.diags.push_back("gamma: expected a positive number or \"auto\"");
  }
  if (auto t = r.unsigned_int(doc, "", "rounds", true)) s.rounds = static_cast<std::size_t>(*t);
  if (auto seed = r.unsigned_int(doc, "", "seed", false)) s.seed = *seed;

  if (const auto* agents = r.array(doc, "", "agents", true)) {
    for (std::size_t i = 0; i < agents->size(); ++i) {
      const std::string where = "agents[" + std::to_string(i) + "]";
      const auto& a = (*agents)[i];
      if (!a.is_object()) {
        r.diags.push_back(where + ": expected an object");
        continue;
      }
      r.allow_only(a, where, {"id", "cost", "active", "x_hat"});
      AgentSpec spec;
      if (auto id = r.unsigned_int(a, where, "id", true)) spec.id = detail::JsonReader::node(*id);
      if (const auto* c = r.object(a, where, "cost", true)) spec.cost = r.cost(*c, where + ".cost");
      spec.active = r.boolean(a, where, "active").value_or(true);
      spec.x_hat = r.number_or(a, where, "x_hat", "random");
      s.agents.push_back(spec);
    }
  }

  if (const auto* events = r.array(doc, "", "events", false)) {
    for (std::size_t i = 0; i < events->size(); ++i) {
      const std::string where = "events[" + std::to_string(i) + "]";
      const auto& e = (*events)[i];
      if (!e.is_object()) {
        r.diags.push_back(where + ": expected an object");
        continue;
      }
      r.allow_only(e, where, {"round", "agent", "kind", "x_hat", "cost"});
      EventSpec ev;
      if (auto k = r.unsigned_int(e, where, "round", true)) ev.round = static_cast<std::size_t>(*k);
      if (auto id = r.unsigned_int(e, where, "agent", true)) ev.agent = detail::JsonReader::node(*id);
      if (auto kind = r.string(e, where, "kind", true)) {
        if (*kind == "join") ev.kind = EventKind::join;
        else if (*kind == "leave") ev.kind = EventKind::leave;
        else r.diags.push_back(where + ".kind: expected \"join\" or \"leave\", got \"" + *kind + "\"");
      }
      if (ev.kind == EventKind::leave && (e.contains("x_hat") || e.contains("cost")))
        r.diags.push_back(where + ": x_hat and cost are only allowed on join events");
      ev.x_hat = r.number_or(e, where, "x_hat", "random");
      if (const auto* c = r.object(e, where, "cost", false)) ev.cost = r.cost(*c, where + ".cost");
      s.events.push_back(ev);
    }
  }

  if (const auto* v = r.object(doc, "", "validators", false)) {
    r.allow_only(*v, "validators", {"beta", "gradient_check"});
    if (auto b = r.unsigned_int(*v, "validators", "beta", false)) s.validators.beta = static_cast<std::size_t>(*b);
    s.validators.gradient_check = r.boolean(*v, "validators", "gradient_check").value_or(true);
  }

  if (!r.diags.empty()) throw ScenarioError(std::move(r.diags));
  return s;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Parse + validate + fill defaults (diameter bound, auto step size).
inline Scenario load_scenario(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  return finalize(parse_scenario(read_text_file(path)), warnings);
}

inline nlohmann::json cost_to_json(const CostSpec& c) {
  nlohmann::json j{{"kind", c.kind}, {"a", c.a}, {"b", c.b}};
  if (c.mu) j["mu"] = *c.mu;
  return j;
}

// Serializes the scenario as written by a user: unset optionals stay unset.
inline nlohmann::json scenario_to_json(const Scenario& s) {
  using nlohmann::json;
  json edges = json::array();
  for (const auto& e : s.edges) edges.push_back({e.from + 1, e.to + 1});
  json graph{{"nodes", s.nodes}, {"edges", edges}};
  if (s.diameter_bound) graph["diameter_bound"] = *s.diameter_bound;

  json agents = json::array();
  for (const auto& a : s.agents) {
    json ja{{"id", a.id + 1}, {"cost", cost_to_json(a.cost)}, {"active", a.active}};
    ja["x_hat"] = a.x_hat ? json(*a.x_hat) : json("random");
    agents.push_back(ja);
  }
  json events = json::array();
  for (const auto& e : s.events) {
    json je{{"round", e.round}, {"agent", e.agent + 1}, {"kind", e.kind == EventKind::join ? "join" : "leave"}};
    if (e.kind == EventKind::join) {
      je["x_hat"] = e.x_hat ? json(*e.x_hat) : json("random");
      if (e.cost) je["cost"] = cost_to_json(*e.cost);
    }
    events.push_back(je);
  }
  json doc{{"graph", graph}, {"rounds", s.rounds}, {"seed", s.seed}, {"agents", agents}, {"events", events}};
  doc["gamma"] = (s.gamma && !s.gamma_auto) ? json(*s.gamma) : json("auto");
  json validators{{"gradient_check", s.validators.gradient_check}};
  if (s.validators.beta) validators["beta"] = *s.validators.beta;
  doc["validators"] = validators;
  return doc;
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << scenario_to_json(s).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace opengt
