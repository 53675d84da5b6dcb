#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "sem/market.hpp"

namespace sem {

using json = nlohmann::json;

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorCode::invalid_spec, std::string("missing field '") + key + "'", path);
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_spec, std::string("wrong value type: ") + e.what(), path);
  }
}

inline ObjectIndex object_ref(const ObjectSet& objects, const json& j, const std::string& path) {
  auto id = get_as<std::string>(j, path);
  auto x = objects.find(id);
  if (!x) throw Error(ErrorCode::invalid_spec, "unknown object '" + id + "'", path);
  return *x;
}

inline std::vector<double> density_row(const MarketSpec& spec, const json& row, const std::string& path) {
  if (!row.is_object()) throw Error(ErrorCode::invalid_spec, "density must be a map from type id to probability", path);
  std::vector<double> out(spec.types.size(), 0.0);
  for (auto it = row.begin(); it != row.end(); ++it) {
    auto i = spec.find_type(it.key());
    if (!i) throw Error(ErrorCode::invalid_spec, "unknown type '" + it.key() + "'", path + "." + it.key());
    out[*i] = get_as<double>(it.value(), path + "." + it.key());
  }
  return out;
}

}  // namespace detail

/// Preference tiers as a JSON list of lists of object ids.
inline WeakOrder parse_tiers(const ObjectSet& objects, const json& j, const std::string& path) {
  if (!j.is_array()) throw Error(ErrorCode::invalid_spec, "tiers must be a list of lists", path);
  std::vector<std::vector<ObjectIndex>> tiers;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto tier_path = path + "[" + std::to_string(k) + "]";
    if (!j[k].is_array() || j[k].empty()) throw Error(ErrorCode::invalid_spec, "tier must be a nonempty list", tier_path);
    std::vector<ObjectIndex> tier;
    for (const auto& x : j[k]) tier.push_back(detail::object_ref(objects, x, tier_path));
    tiers.push_back(std::move(tier));
  }
  try {
    return WeakOrder::with_fallback(std::move(tiers), objects.size(), objects.null_object);
  } catch (const Error& e) {
    throw Error(ErrorCode::invalid_spec, e.what(), path);
  }
}

inline json tiers_to_json(const ObjectSet& objects, const WeakOrder& w) {
  json out = json::array();
  for (const auto& tier : w.tiers()) {
    json t = json::array();
    for (auto x : tier) t.push_back(objects.ids[x]);
    out.push_back(std::move(t));
  }
  return out;
}

inline MarketSpec market_spec_from_json(const json& doc) {
  MarketSpec spec;
  if (!doc.is_object()) throw Error(ErrorCode::invalid_spec, "document must be an object", "$");

  if (doc.contains("replicas")) spec.replicas = detail::get_as<int>(doc.at("replicas"), "replicas");

  const auto& arrivals = detail::require(doc, "arrivals", "$");
  spec.arrivals.horizon = detail::get_as<int>(detail::require(arrivals, "T", "arrivals"), "arrivals.T");
  if (spec.arrivals.horizon < 1) throw Error(ErrorCode::invalid_spec, "horizon must be positive", "arrivals.T");

  const auto& objs = detail::require(doc, "objects", "$");
  if (!objs.is_array() || objs.empty()) throw Error(ErrorCode::invalid_spec, "objects must be a nonempty list", "objects");
  std::optional<ObjectIndex> null_object;
  std::vector<bool> explicit_supply;
  for (std::size_t x = 0; x < objs.size(); ++x) {
    const auto path = "objects[" + std::to_string(x) + "]";
    const auto& o = objs[x];
    auto id = detail::get_as<std::string>(detail::require(o, "id", path), path + ".id");
    if (spec.objects.find(id)) throw Error(ErrorCode::invalid_spec, "duplicate object id", path + ".id");
    const bool is_null = o.contains("null") && detail::get_as<bool>(o.at("null"), path + ".null");
    if (is_null) {
      if (null_object) throw Error(ErrorCode::invalid_spec, "more than one null object", path);
      null_object = x;
    }
    std::int64_t supply = 0;
    if (o.contains("supply")) {
      supply = detail::get_as<std::int64_t>(o.at("supply"), path + ".supply");
    } else if (!is_null) {
      throw Error(ErrorCode::invalid_spec, "missing field 'supply'", path);
    }
    explicit_supply.push_back(o.contains("supply"));
    spec.objects.ids.push_back(std::move(id));
    spec.objects.supply.push_back(supply);
  }
  if (!null_object) {
    // an object named "o" doubles as the null object
    null_object = spec.objects.find("o");
    if (!null_object) throw Error(ErrorCode::invalid_spec, "no null object declared", "objects");
  }
  spec.objects.null_object = *null_object;
  if (!explicit_supply[*null_object])
    spec.objects.supply[*null_object] = static_cast<std::int64_t>(spec.arrivals.horizon) * spec.replicas + 1;

  const auto& types = detail::require(doc, "types", "$");
  if (!types.is_array()) throw Error(ErrorCode::invalid_spec, "types must be a list", "types");
  for (std::size_t i = 0; i < types.size(); ++i) {
    const auto path = "types[" + std::to_string(i) + "]";
    AgentType ty;
    ty.id = detail::get_as<std::string>(detail::require(types[i], "id", path), path + ".id");
    ty.preferences = parse_tiers(spec.objects, detail::require(types[i], "tiers", path), path + ".tiers");
    if (types[i].contains("arrival_time") && !types[i].at("arrival_time").is_null())
      ty.arrival_time = detail::get_as<int>(types[i].at("arrival_time"), path + ".arrival_time");
    spec.types.push_back(std::move(ty));
  }

  if (arrivals.contains("density")) {
    const auto& d = arrivals.at("density");
    if (!d.is_array()) throw Error(ErrorCode::invalid_spec, "density must be a per-period list", "arrivals.density");
    if (d.size() != static_cast<std::size_t>(spec.arrivals.horizon))
      throw Error(ErrorCode::invalid_spec, "one density per period required", "arrivals.density");
    for (std::size_t t = 0; t < d.size(); ++t)
      spec.arrivals.density.push_back(detail::density_row(spec, d[t], "arrivals.density[" + std::to_string(t) + "]"));
  } else if (arrivals.contains("stationary")) {
    auto row = detail::density_row(spec, arrivals.at("stationary"), "arrivals.stationary");
    spec.arrivals.density.assign(static_cast<std::size_t>(spec.arrivals.horizon), row);
  } else {
    throw Error(ErrorCode::invalid_spec, "missing field 'density' or 'stationary'", "arrivals");
  }

  if (doc.contains("shock")) {
    const auto& s = doc.at("shock");
    if (s.contains("kind")) {
      auto kind = detail::get_as<std::string>(s.at("kind"), "shock.kind");
      if (kind == "ntb") spec.shock.kind = ShockKind::ntb;
      else if (kind == "rtb") spec.shock.kind = ShockKind::rtb;
      else throw Error(ErrorCode::invalid_spec, "kind must be 'ntb' or 'rtb'", "shock.kind");
    }
    if (s.contains("beta")) spec.shock.common_bound = detail::get_as<double>(s.at("beta"), "shock.beta");
    if (s.contains("z")) spec.shock.rtb_halfwidth = detail::get_as<double>(s.at("z"), "shock.z");
  }

  if (doc.contains("budgets")) {
    const auto& b = doc.at("budgets");
    auto rule = b.contains("rule") ? detail::get_as<std::string>(b.at("rule"), "budgets.rule") : std::string("greedy");
    if (rule == "greedy") {
      spec.budget_spec.rule = BudgetRule::greedy;
      if (b.contains("base")) spec.budget_spec.base = detail::get_as<double>(b.at("base"), "budgets.base");
      if (b.contains("margin")) spec.budget_spec.margin = detail::get_as<double>(b.at("margin"), "budgets.margin");
      if (b.contains("gap")) {
        auto gap = detail::get_as<std::string>(b.at("gap"), "budgets.gap");
        if (gap == "appendix") spec.budget_spec.gap = BudgetGap::appendix;
        else if (gap == "text") spec.budget_spec.gap = BudgetGap::text;
        else throw Error(ErrorCode::invalid_spec, "gap must be 'appendix' or 'text'", "budgets.gap");
      }
    } else if (rule == "fixed" || rule == "explicit") {
      spec.budget_spec.rule = rule == "fixed" ? BudgetRule::fixed : BudgetRule::explicit_schedule;
      const auto& values = detail::require(b, "values", "budgets");
      spec.budget_spec.values.assign(spec.types.size(), {});
      for (std::size_t i = 0; i < spec.types.size(); ++i) {
        const auto path = "budgets.values." + spec.types[i].id;
        if (!values.contains(spec.types[i].id)) throw Error(ErrorCode::invalid_spec, "missing budget", path);
        const auto& v = values.at(spec.types[i].id);
        if (rule == "fixed") spec.budget_spec.values[i] = {detail::get_as<double>(v, path)};
        else spec.budget_spec.values[i] = detail::get_as<std::vector<double>>(v, path);
      }
    } else {
      throw Error(ErrorCode::invalid_spec, "rule must be 'greedy', 'fixed' or 'explicit'", "budgets.rule");
    }
  }

  try {
    spec.finalize();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::invalid_argument) throw Error(ErrorCode::invalid_spec, e.what(), "budgets");
    throw;
  }
  return spec;
}

/// Parses and validates a market document.
inline MarketSpec parse_market_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::invalid_spec, std::string("malformed document: ") + e.what(), "$");
  }
  return market_spec_from_json(doc);
}

inline json market_spec_to_json(const MarketSpec& spec) {
  json doc;
  json objs = json::array();
  for (std::size_t x = 0; x < spec.objects.size(); ++x) {
    json o{{"id", spec.objects.ids[x]}, {"supply", spec.objects.supply[x]}};
    if (x == spec.objects.null_object) o["null"] = true;
    objs.push_back(std::move(o));
  }
  doc["objects"] = std::move(objs);
  json types = json::array();
  for (const auto& ty : spec.types) {
    json t{{"id", ty.id}, {"tiers", tiers_to_json(spec.objects, ty.preferences)}};
    if (ty.arrival_time) t["arrival_time"] = *ty.arrival_time;
    types.push_back(std::move(t));
  }
  doc["types"] = std::move(types);
  json density = json::array();
  for (const auto& row : spec.arrivals.density) {
    json r = json::object();
    for (std::size_t i = 0; i < row.size(); ++i)
      if (row[i] != 0.0) r[spec.types[i].id] = row[i];
    density.push_back(std::move(r));
  }
  doc["arrivals"] = {{"T", spec.arrivals.horizon}, {"density", std::move(density)}};
  json budgets;
  switch (spec.budget_spec.rule) {
    case BudgetRule::greedy:
      budgets = {{"rule", "greedy"},
                 {"base", spec.budget_spec.base},
                 {"gap", spec.budget_spec.gap == BudgetGap::appendix ? "appendix" : "text"},
                 {"margin", spec.budget_spec.margin}};
      break;
    case BudgetRule::fixed:
    case BudgetRule::explicit_schedule: {
      const bool fixed = spec.budget_spec.rule == BudgetRule::fixed;
      json values = json::object();
      for (std::size_t i = 0; i < spec.types.size(); ++i) {
        if (fixed) values[spec.types[i].id] = spec.budget_spec.values[i].at(0);
        else values[spec.types[i].id] = spec.budget_spec.values[i];
      }
      budgets = {{"rule", fixed ? "fixed" : "explicit"}, {"values", std::move(values)}};
      break;
    }
  }
  doc["budgets"] = std::move(budgets);
  doc["shock"] = {{"kind", spec.shock.kind == ShockKind::ntb ? "ntb" : "rtb"},
                  {"beta", spec.shock.common_bound},
                  {"z", spec.shock.rtb_halfwidth}};
  doc["replicas"] = spec.replicas;
  return doc;
}

inline std::string serialize_market_spec(const MarketSpec& spec) { return market_spec_to_json(spec).dump(2); }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline MarketSpec load_market_spec(const std::string& path) { return parse_market_spec(read_file(path)); }

}  // namespace sem
