#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "sem/trace.hpp"

namespace sem {

struct ServiceOptions {
  /// Directory for append-only session logs; empty keeps sessions in memory.
  std::string data_dir;
  SemOptions sem;
  /// Realized-to-expected arrival ratio outside [1/f, f] is flagged.
  double deviation_factor = 2.0;
};

/// A live mechanism run driven by operator requests.
class Session {
 public:
  Session(std::string id, MarketSpec spec, std::uint64_t seed, const ServiceOptions& opt)
      : id_(std::move(id)),
        spec_(std::move(spec)),
        seed_(seed),
        opt_(opt),
        shocks_(mechanism_shocks(spec_, seed_, opt.sem.shock_draws)),
        state_(initial_state(spec_)) {}

  const std::string& id() const { return id_; }
  std::mutex& mutex() { return mutex_; }
  const std::vector<json>& log() const { return log_; }
  const SemState& state() const { return state_; }
  const MarketSpec& spec() const { return spec_; }
  bool open() const { return !state_.terminated && state_.period <= spec_.horizon(); }

  json view() const {
    json j{{"id", id_},
           {"seed", seed_},
           {"status", open() ? "open" : "terminated"},
           {"period", state_.period},
           {"horizon", spec_.horizon()},
           {"replicas", spec_.replicas},
           {"objects", spec_.objects.ids},
           {"remaining", object_map(spec_, state_.remaining)},
           {"periods_completed", state_.history.size()}};
    if (pending_) j["pending"] = spot_json(pending_->arrivals, pending_->spot);
    return j;
  }

  json post_arrivals(const json& body, bool record = true) {
    require_open();
    auto arrivals = parse_arrivals(body);
    auto spot = evaluate(arrivals);
    if (record) append({{"op", "arrivals"}, {"arrivals", body.at("arrivals")}});
    pending_ = Pending{std::move(arrivals), std::move(spot)};
    return spot_json(pending_->arrivals, pending_->spot);
  }

  json whatif(const json& body) const {
    require_open();
    const auto arrivals = parse_arrivals(body);
    return spot_json(arrivals, evaluate(arrivals));
  }

  json realize(bool record = true) {
    require_open();
    if (!pending_) throw Error(ErrorCode::conflict, "no arrivals pending for period " + std::to_string(state_.period));
    const SpotOutcome* spot = pending_->spot ? &*pending_->spot : nullptr;
    auto step = sem_step(spec_, state_, pending_->arrivals, shocks_, seed_, opt_.sem, spot);
    if (record) append({{"op", "realize"}});
    state_ = std::move(step.next);
    pending_.reset();
    json assigned = json::array();
    for (std::size_t k = 0; k < step.record.arrivals.size(); ++k)
      assigned.push_back({{"label", step.record.arrivals[k].label},
                          {"object", spec_.objects.ids[step.record.assignment[k]]}});
    return {{"period", step.record.period},
            {"assignment", std::move(assigned)},
            {"remaining", object_map(spec_, state_.remaining)},
            {"next_period", state_.period},
            {"status", open() ? "open" : "terminated"}};
  }

  json trace() const { return trace_to_json(spec_, state_); }

  /// Re-applies a logged operator action during replay.
  void replay(const json& entry) {
    const auto op = entry.at("op").get<std::string>();
    if (op == "arrivals") post_arrivals({{"arrivals", entry.at("arrivals")}}, false);
    else if (op == "realize") realize(false);
    log_.push_back(entry);
  }

  void set_log_path(std::string path) { log_path_ = std::move(path); }

  void append(json entry) {
    entry["time"] = timestamp();
    if (!log_path_.empty()) {
      std::ofstream out(log_path_, std::ios::app);
      if (!out) throw Error(ErrorCode::io, "cannot append to session log", log_path_);
      out << entry.dump() << "\n";
    }
    log_.push_back(std::move(entry));
  }

 private:
  struct Pending {
    std::vector<Arrival> arrivals;
    std::optional<SpotOutcome> spot;
  };

  static std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  void require_open() const {
    if (!open()) throw Error(ErrorCode::terminated, "session " + id_ + " is terminated");
  }

  std::vector<Arrival> parse_arrivals(const json& body) const {
    if (!body.is_object() || !body.contains("arrivals") || !body["arrivals"].is_array())
      throw Error(ErrorCode::invalid_argument, "body needs an arrivals list", "arrivals");
    std::vector<Arrival> out;
    for (std::size_t k = 0; k < body["arrivals"].size(); ++k)
      out.push_back(arrival_from_json(spec_, body["arrivals"][k], "arrivals[" + std::to_string(k) + "]"));
    return out;
  }

  std::optional<SpotOutcome> evaluate(const std::vector<Arrival>& arrivals) const {
    if (real_supply_exhausted(state_.remaining, spec_.null_object())) return std::nullopt;
    return spot_lotteries(spec_, state_.period, state_.remaining, arrivals, shocks_, opt_.sem);
  }

  json spot_json(const std::vector<Arrival>& arrivals, const std::optional<SpotOutcome>& spot) const {
    json lotteries = json::array();
    for (std::size_t k = 0; k < arrivals.size(); ++k) {
      std::vector<double> row(spec_.num_objects(), 0.0);
      if (spot) row = spot->lotteries[k];
      else row[spec_.null_object()] = 1.0;
      lotteries.push_back({{"label", arrivals[k].label}, {"lottery", object_map(spec_, row)}});
    }
    const double expected = static_cast<double>(spec_.replicas);
    const double ratio = static_cast<double>(arrivals.size()) / expected;
    json j{{"period", state_.period},
           {"lotteries", std::move(lotteries)},
           {"arrival_count", arrivals.size()},
           {"expected_count", expected},
           {"count_deviation", ratio > opt_.deviation_factor || ratio < 1.0 / opt_.deviation_factor}};
    if (spot) {
      j["prices"] = object_map(spec_, spot->equilibrium.prices);
      j["clearing_error"] = spot->equilibrium.clearing_error;
      j["iterations"] = spot->equilibrium.iterations;
      j["converged"] = spot->equilibrium.converged;
    } else {
      j["prices"] = object_map(spec_, std::vector<double>(spec_.num_objects(), 0.0));
      j["clearing_error"] = 0.0;
      j["iterations"] = 0;
      j["converged"] = true;
    }
    return j;
  }

  std::string id_;
  MarketSpec spec_;
  std::uint64_t seed_;
  ServiceOptions opt_;
  ShockSample shocks_;
  SemState state_;
  std::optional<Pending> pending_;
  std::vector<json> log_;
  std::string log_path_;
  std::mutex mutex_;
};

/// Owns sessions; each session is serialized by its own mutex while distinct
/// sessions proceed in parallel.
class SessionManager {
 public:
  explicit SessionManager(ServiceOptions opt = {}) : opt_(std::move(opt)) {
    if (!opt_.data_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(opt_.data_dir, ec);
      if (ec) throw Error(ErrorCode::io, "cannot create data directory", opt_.data_dir);
      restore();
    }
  }

  /// body: {"market": {...}, "seed": n, "id"?: "..."}
  json create(const json& body) {
    if (!body.is_object() || !body.contains("market"))
      throw Error(ErrorCode::invalid_spec, "body needs a market document", "market");
    auto spec = market_spec_from_json(body["market"]);
    const std::uint64_t seed = body.contains("seed") ? body["seed"].get<std::uint64_t>() : 1;
    std::unique_lock lock(map_mutex_);
    std::string id;
    if (body.contains("id")) {
      id = body["id"].get<std::string>();
      if (id.empty() || id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_") !=
                            std::string::npos)
        throw Error(ErrorCode::invalid_argument, "session id must be alphanumeric, '-' or '_'", "id");
      if (sessions_.count(id)) throw Error(ErrorCode::conflict, "session " + id + " already exists", "id");
    } else {
      do id = "s" + std::to_string(++counter_);
      while (sessions_.count(id));
    }
    auto s = std::make_shared<Session>(id, std::move(spec), seed, opt_);
    if (!opt_.data_dir.empty()) s->set_log_path(log_path(id));
    s->append({{"op", "create"}, {"id", id}, {"seed", seed}, {"market", body["market"]}});
    sessions_[id] = s;
    return s->view();
  }

  template <class F>
  auto with_session(const std::string& id, F&& f) {
    auto s = find(id);
    std::lock_guard lock(s->mutex());
    return f(*s);
  }

  json view(const std::string& id) {
    return with_session(id, [](Session& s) { return s.view(); });
  }
  json post_arrivals(const std::string& id, const json& body) {
    return with_session(id, [&](Session& s) { return s.post_arrivals(body); });
  }
  json realize(const std::string& id) {
    return with_session(id, [](Session& s) { return s.realize(); });
  }
  json whatif(const std::string& id, const json& body) {
    return with_session(id, [&](Session& s) { return s.whatif(body); });
  }
  json trace(const std::string& id) {
    return with_session(id, [](Session& s) { return s.trace(); });
  }

  std::vector<std::string> ids() const {
    std::shared_lock lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
  }

 private:
  std::shared_ptr<Session> find(const std::string& id) {
    std::shared_lock lock(map_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::not_found, "no session " + id);
    return it->second;
  }

  std::string log_path(const std::string& id) const {
    return (std::filesystem::path(opt_.data_dir) / (id + ".jsonl")).string();
  }

  void restore() {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(opt_.data_dir))
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      std::ifstream in(path);
      std::string line;
      std::shared_ptr<Session> s;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto entry = json::parse(line);
        if (!s) {
          s = std::make_shared<Session>(entry.at("id").get<std::string>(), market_spec_from_json(entry.at("market")),
                                        entry.at("seed").get<std::uint64_t>(), opt_);
          s->replay(entry);
          continue;
        }
        s->replay(entry);
      }
      if (!s) continue;
      s->set_log_path(path.string());
      sessions_[s->id()] = s;
    }
  }

  ServiceOptions opt_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t counter_ = 0;
};

}  // namespace sem
