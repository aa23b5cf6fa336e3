#pragma once

// Diagnostic annotation service: samples with model-generated attributes,
// True / False / Skip verdicts in an append-only JSONL store, HTTP+JSON API.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
// <resolv.h>, pulled in by httplib, defines _res as a macro; Eigen uses the
// name as a parameter.
#undef _res
#include <json.hpp>

#include "steerseg/errors.hpp"
#include "steerseg/zip.hpp"

namespace steerseg::service {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct DiagnosticSample {
  std::string id;
  std::string media;  // path relative to the samples directory
  std::string expression;
  std::string reasoning;
  std::vector<std::string> attributes;
};

/// Reads <dir>/samples.json: a list of {id, media, expression, reasoning, attributes}.
inline std::vector<DiagnosticSample> load_samples(const fs::path& dir) {
  const fs::path p = dir / "samples.json";
  json j;
  try {
    j = json::parse(zip::read_file(p));
  } catch (const json::exception& e) {
    throw LoadError(p.string() + ": " + e.what());
  }
  if (!j.is_array()) throw LoadError(p.string() + ": expected a list of samples");
  std::vector<DiagnosticSample> out;
  std::map<std::string, int> seen;
  for (const auto& s : j) {
    DiagnosticSample d;
    try {
      d.id = s.at("id").get<std::string>();
      d.media = s.value("media", std::string());
      d.expression = s.at("expression").get<std::string>();
      d.reasoning = s.value("reasoning", std::string());
      d.attributes = s.value("attributes", std::vector<std::string>{});
    } catch (const json::exception& e) {
      throw LoadError(p.string() + ": malformed sample: " + e.what());
    }
    if (d.id.empty() || seen[d.id]++) throw LoadError(p.string() + ": empty or duplicate sample id '" + d.id + "'");
    out.push_back(std::move(d));
  }
  return out;
}

inline void write_samples(const fs::path& dir, const std::vector<DiagnosticSample>& samples) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : samples) {
    arr.push_back({{"id", s.id}, {"media", s.media}, {"expression", s.expression},
                   {"reasoning", s.reasoning}, {"attributes", s.attributes}});
  }
  zip::write_file(dir / "samples.json", arr.dump(2) + "\n");
}

inline bool valid_verdict(const std::string& v) { return v == "true" || v == "false" || v == "skip"; }

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Verdict {
  std::string value = "unlabeled";
  std::string timestamp;
};

struct Stats {
  std::size_t n_true = 0, n_false = 0, n_skip = 0, total = 0;
  std::size_t labeled() const { return n_true + n_false; }
  std::size_t reviewed() const { return n_true + n_false + n_skip; }
  /// Percent true among labeled, to one decimal; empty when nothing is labeled.
  std::optional<double> percent_true() const {
    if (labeled() == 0) return std::nullopt;
    return std::round(1000.0 * double(n_true) / double(labeled())) / 10.0;
  }
};

/// Verdict state over a fixed sample set, persisted as one JSON object per
/// line. Reload replays the file; the last line for an id wins.
class VerdictStore {
 public:
  using Clock = std::function<std::string()>;

  VerdictStore(std::vector<DiagnosticSample> samples, fs::path store, Clock clock = utc_now)
      : samples_(std::move(samples)), store_(std::move(store)), clock_(std::move(clock)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) index_[samples_[i].id] = i;
    verdicts_.assign(samples_.size(), {});
    replay();
  }

  const std::vector<DiagnosticSample>& samples() const { return samples_; }

  const DiagnosticSample* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &samples_[it->second];
  }

  Verdict verdict(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = index_.find(id);
    require(it != index_.end(), "unknown sample " + id);
    return verdicts_[it->second];
  }

  /// Appends the record first; memory changes only once the write succeeded.
  /// Throws LoadError on store failure, ContractViolation on bad input.
  Verdict set(const std::string& id, const std::string& value) {
    require(valid_verdict(value), "invalid verdict '" + value + "'");
    std::lock_guard lock(mu_);
    auto it = index_.find(id);
    require(it != index_.end(), "unknown sample " + id);
    Verdict v{value, clock_()};
    const std::string line = json{{"id", id}, {"verdict", value}, {"timestamp", v.timestamp}}.dump() + "\n";
    {
      std::ofstream out(store_, std::ios::binary | std::ios::app);
      if (!out) throw LoadError("cannot open verdict store " + store_.string());
      out.write(line.data(), std::streamsize(line.size()));
      out.flush();
      if (!out) throw LoadError("write failed for verdict store " + store_.string());
    }
    verdicts_[it->second] = v;
    return v;
  }

  Stats stats() const {
    std::lock_guard lock(mu_);
    Stats s;
    s.total = samples_.size();
    for (const auto& v : verdicts_) {
      s.n_true += v.value == "true";
      s.n_false += v.value == "false";
      s.n_skip += v.value == "skip";
    }
    return s;
  }

 private:
  void replay() {
    if (!fs::exists(store_)) return;
    std::ifstream in(store_, std::ios::binary);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception&) {
        // A torn final line from a crash is skipped; earlier damage is fatal.
        if (in.peek() == EOF) break;
        throw LoadError(store_.string() + ":" + std::to_string(lineno) + ": malformed record");
      }
      const std::string id = j.value("id", std::string());
      const std::string v = j.value("verdict", std::string());
      auto it = index_.find(id);
      if (it == index_.end() || !valid_verdict(v)) continue;
      verdicts_[it->second] = {v, j.value("timestamp", std::string())};
    }
  }

  std::vector<DiagnosticSample> samples_;
  std::map<std::string, std::size_t> index_;
  std::vector<Verdict> verdicts_;
  fs::path store_;
  Clock clock_;
  mutable std::mutex mu_;
};

inline ordered_json stats_json(const Stats& s) {
  ordered_json j{{"true", s.n_true}, {"false", s.n_false}, {"skip", s.n_skip},
                 {"unlabeled", s.total - s.reviewed()}, {"labeled", s.labeled()}, {"reviewed", s.reviewed()},
                 {"total", s.total}};
  const auto p = s.percent_true();
  j["percent_true"] = p ? ordered_json(*p) : ordered_json(nullptr);
  j["progress"] = s.total == 0 ? 0.0 : double(s.reviewed()) / double(s.total);
  return j;
}

/// Registers the API on `srv`. Media files are served under /media/ from
/// `samples_dir`; `ui_dir`, when non-empty, is served at /.
inline void install(httplib::Server& srv, VerdictStore& store, const fs::path& samples_dir,
                    const fs::path& ui_dir = {}) {
  auto send = [](httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  srv.Get("/api/samples", [&store, send](const httplib::Request&, httplib::Response& res) {
    ordered_json arr = ordered_json::array();
    for (const auto& s : store.samples()) arr.push_back({{"id", s.id}, {"verdict", store.verdict(s.id).value}});
    send(res, 200, {{"samples", arr}, {"total", store.samples().size()}});
  });
  srv.Get(R"(/api/samples/([^/]+))", [&store, send](const httplib::Request& req, httplib::Response& res) {
    const auto* s = store.find(req.matches[1]);
    if (!s) return send(res, 404, {{"error", "unknown sample"}});
    const auto v = store.verdict(s->id);
    send(res, 200, {{"id", s->id}, {"media", s->media.empty() ? "" : "/media/" + s->media},
                    {"expression", s->expression}, {"reasoning", s->reasoning}, {"attributes", s->attributes},
                    {"verdict", v.value}, {"timestamp", v.timestamp}});
  });
  srv.Post(R"(/api/samples/([^/]+)/verdict)", [&store, send](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!store.find(id)) return send(res, 404, {{"error", "unknown sample"}});
    std::string v;
    try {
      const auto j = json::parse(req.body);
      v = j.at("verdict").get<std::string>();
    } catch (const json::exception&) {
      return send(res, 400, {{"error", "body must be {\"verdict\": \"true\"|\"false\"|\"skip\"}"}});
    }
    if (!valid_verdict(v)) return send(res, 400, {{"error", "verdict must be true, false or skip"}});
    try {
      const auto saved = store.set(id, v);
      send(res, 200, {{"id", id}, {"verdict", saved.value}, {"timestamp", saved.timestamp}});
    } catch (const LoadError& e) {
      send(res, 500, {{"error", e.what()}});
    }
  });
  srv.Get("/api/stats", [&store, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, stats_json(store.stats()));
  });
  srv.set_mount_point("/media", samples_dir.string());
  if (!ui_dir.empty()) srv.set_mount_point("/", ui_dir.string());
}

}  // namespace steerseg::service
