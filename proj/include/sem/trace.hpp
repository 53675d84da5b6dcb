#pragma once

#include "sem/market_io.hpp"
#include "sem/mechanism.hpp"

namespace sem {

inline json object_map(const MarketSpec& spec, const std::vector<double>& v) {
  json out = json::object();
  for (std::size_t x = 0; x < v.size(); ++x) out[spec.objects.ids[x]] = v[x];
  return out;
}

inline json object_map(const MarketSpec& spec, const std::vector<std::int64_t>& v) {
  json out = json::object();
  for (std::size_t x = 0; x < v.size(); ++x) out[spec.objects.ids[x]] = v[x];
  return out;
}

inline std::vector<double> object_vector(const MarketSpec& spec, const json& j, const std::string& path) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "expected a map keyed by object id", path);
  std::vector<double> v(spec.num_objects(), 0.0);
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::size_t x = 0;
    while (x < spec.num_objects() && spec.objects.ids[x] != it.key()) ++x;
    if (x == spec.num_objects()) throw Error(ErrorCode::invalid_argument, "unknown object", path + "." + it.key());
    if (!it.value().is_number()) throw Error(ErrorCode::invalid_argument, "expected a number", path + "." + it.key());
    v[x] = it.value().get<double>();
  }
  return v;
}

inline json arrival_to_json(const MarketSpec& spec, const Arrival& a) {
  json j{{"label", a.label}, {"tiers", tiers_to_json(spec.objects, a.prefs)}};
  if (a.type) j["type"] = spec.types[*a.type].id;
  return j;
}

/// Accepts {"type": id} for a declared type, or {"label": ..., "tiers": [[...]]}
/// for an ad hoc report; tiers that coincide with a declared type still
/// count as ad hoc unless the type is named.
inline Arrival arrival_from_json(const MarketSpec& spec, const json& j, const std::string& path) {
  if (j.is_string()) {
    auto i = spec.find_type(j.get<std::string>());
    if (!i) throw Error(ErrorCode::invalid_argument, "unknown type " + j.get<std::string>(), path);
    return arrival_of(spec, *i);
  }
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "arrival must be a type id or an object", path);
  if (j.contains("type")) {
    if (!j["type"].is_string()) throw Error(ErrorCode::invalid_argument, "type must be a string", path + ".type");
    auto i = spec.find_type(j["type"].get<std::string>());
    if (!i) throw Error(ErrorCode::invalid_argument, "unknown type " + j["type"].get<std::string>(), path + ".type");
    return arrival_of(spec, *i);
  }
  if (!j.contains("tiers")) throw Error(ErrorCode::invalid_argument, "arrival needs a type or tiers", path);
  Arrival a;
  try {
    a.prefs = parse_tiers(spec.objects, j["tiers"], path + ".tiers");
  } catch (const Error& e) {
    throw Error(ErrorCode::invalid_argument, e.what());
  }
  a.label = j.contains("label") && j["label"].is_string() ? j["label"].get<std::string>() : "adhoc";
  if (spec.find_type(a.label)) throw Error(ErrorCode::conflict, "ad hoc label collides with a declared type", path + ".label");
  return a;
}

inline json period_record_to_json(const MarketSpec& spec, const PeriodRecord& rec) {
  json arrivals = json::array(), lotteries = json::array(), assignment = json::array();
  for (const auto& a : rec.arrivals) arrivals.push_back(arrival_to_json(spec, a));
  for (const auto& row : rec.lotteries) lotteries.push_back(object_map(spec, row));
  for (auto x : rec.assignment) assignment.push_back(spec.objects.ids[x]);
  return {{"period", rec.period},
          {"arrivals", std::move(arrivals)},
          {"budgets", rec.budgets},
          {"supply_before", object_map(spec, rec.supply_before)},
          {"prices", object_map(spec, rec.prices)},
          {"clearing_error", rec.clearing_error},
          {"iterations", rec.iterations},
          {"converged", rec.converged},
          {"lotteries", std::move(lotteries)},
          {"assignment", std::move(assignment)}};
}

inline PeriodRecord period_record_from_json(const MarketSpec& spec, const json& j, const std::string& path) {
  PeriodRecord rec;
  try {
    rec.period = j.at("period").get<int>();
    for (std::size_t k = 0; k < j.at("arrivals").size(); ++k)
      rec.arrivals.push_back(arrival_from_json(spec, j["arrivals"][k], path + ".arrivals[" + std::to_string(k) + "]"));
    // a typed arrival keeps its label; an ad hoc one carries its own
    for (std::size_t k = 0; k < rec.arrivals.size(); ++k)
      if (j["arrivals"][k].contains("label")) rec.arrivals[k].label = j["arrivals"][k]["label"].get<std::string>();
    rec.budgets = j.at("budgets").get<std::vector<double>>();
    const auto supply = object_vector(spec, j.at("supply_before"), path + ".supply_before");
    for (double s : supply) rec.supply_before.push_back(static_cast<std::int64_t>(std::llround(s)));
    rec.prices = object_vector(spec, j.at("prices"), path + ".prices");
    rec.clearing_error = j.value("clearing_error", 0.0);
    rec.iterations = j.value("iterations", 0);
    rec.converged = j.value("converged", true);
    for (std::size_t k = 0; k < j.at("lotteries").size(); ++k)
      rec.lotteries.push_back(object_vector(spec, j["lotteries"][k], path + ".lotteries[" + std::to_string(k) + "]"));
    for (const auto& x : j.at("assignment")) {
      const auto id = x.get<std::string>();
      std::size_t i = 0;
      while (i < spec.num_objects() && spec.objects.ids[i] != id) ++i;
      if (i == spec.num_objects()) throw Error(ErrorCode::invalid_argument, "unknown object " + id, path + ".assignment");
      rec.assignment.push_back(i);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("malformed period record: ") + e.what(), path);
  }
  if (rec.lotteries.size() != rec.arrivals.size() || rec.assignment.size() != rec.arrivals.size())
    throw Error(ErrorCode::invalid_argument, "arrivals, lotteries and assignment differ in length", path);
  return rec;
}

/// Full run document: the market plus one record per completed period.
inline json trace_to_json(const MarketSpec& spec, const SemState& state) {
  json periods = json::array();
  for (const auto& rec : state.history) periods.push_back(period_record_to_json(spec, rec));
  return {{"market", market_spec_to_json(spec)},
          {"periods", std::move(periods)},
          {"remaining", object_map(spec, state.remaining)},
          {"next_period", state.period},
          {"terminated", state.terminated}};
}

struct TraceDocument {
  MarketSpec spec;
  std::vector<PeriodRecord> periods;
};

inline TraceDocument trace_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("market") || !doc.contains("periods"))
    throw Error(ErrorCode::invalid_argument, "trace needs market and periods", "$");
  TraceDocument t{market_spec_from_json(doc["market"]), {}};
  for (std::size_t k = 0; k < doc["periods"].size(); ++k)
    t.periods.push_back(period_record_from_json(t.spec, doc["periods"][k], "periods[" + std::to_string(k) + "]"));
  return t;
}

}  // namespace sem
