#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "../field.hpp"
#include "../htpf.hpp"
#include "config.hpp"

namespace halfheat::lab {

/// Shortest round-trip decimal form; identical bytes on every run.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }
inline std::string fmt(const std::string& s) { return s; }
inline std::string fmt(const char* s) { return s; }

/// JSON numbers cannot hold inf/nan; those become strings.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(fmt(v)); }

struct Assertion {
    std::string name;
    bool passed = true;
    std::string detail;
};

/// Everything an experiment produces. summary.json and trials.csv depend only on the config
/// and seed; wall-clock data goes to timings.json.
class Report {
public:
    Report(const ExperimentConfig& cfg, std::vector<std::string> columns)
        : experiment_(cfg.experiment), seed_(cfg.seed), hash_(config_hash(cfg)), config_(to_json(cfg)),
          columns_(std::move(columns)) {}

    template <typename... Ts>
    void row(const Ts&... vals) {
        std::vector<std::string> r{fmt(vals)...};
        add_row(std::move(r));
    }
    void add_row(std::vector<std::string> r) {
        if (r.size() != columns_.size()) throw ConfigError("report row has the wrong number of columns");
        rows_.push_back(std::move(r));
    }

    bool check(const std::string& name, bool ok, const std::string& detail = "") {
        assertions_.push_back({name, ok, detail});
        return ok;
    }

    json& summary() { return summary_; }
    const json& summary() const { return summary_; }
    json& timings() { return timings_; }
    void dump(const std::string& name, const Field& f) { dumps_.emplace_back(name, f); }
    void add_coefficients(json sidecar) { coefficients_.push_back(std::move(sidecar)); }

    bool passed() const {
        for (const auto& a : assertions_)
            if (!a.passed) return false;
        return true;
    }
    const std::vector<Assertion>& assertions() const { return assertions_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }
    const std::vector<std::string>& columns() const { return columns_; }
    const std::string& hash() const { return hash_; }
    std::uint64_t seed() const { return seed_; }

    json failures() const {
        json f = json::array();
        for (const auto& a : assertions_)
            if (!a.passed) f.push_back({{"assertion", a.name}, {"detail", a.detail}});
        return f;
    }

    json summary_document() const {
        json doc;
        doc["experiment"] = experiment_;
        doc["seed"] = seed_;
        doc["config_hash"] = hash_;
        doc["config"] = config_;
        doc["passed"] = passed();
        doc["results"] = summary_;
        json as = json::array();
        for (const auto& a : assertions_) as.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
        doc["assertions"] = as;
        doc["failures"] = failures();
        return doc;
    }

    std::string csv() const {
        std::string out;
        for (const auto& c : columns_) out += c + ",";
        out += "seed,config_hash\n";
        for (const auto& r : rows_) {
            for (const auto& v : r) out += v + ",";
            out += std::to_string(seed_) + "," + hash_ + "\n";
        }
        return out;
    }

    void write(const std::string& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        write_text(dir + "/summary.json", summary_document().dump(2) + "\n");
        write_text(dir + "/trials.csv", csv());
        write_text(dir + "/timings.json", timings_.dump(2) + "\n");
        if (!coefficients_.empty()) write_text(dir + "/coefficients.json", json(coefficients_).dump(2) + "\n");
        for (const auto& [name, f] : dumps_) htpf::write_file(dir + "/" + name + ".htpf", f);
    }

private:
    static void write_text(const std::string& path, const std::string& s) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + path);
        out << s;
    }

    std::string experiment_;
    std::uint64_t seed_;
    std::string hash_;
    json config_;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<Assertion> assertions_;
    json summary_ = json::object();
    json timings_ = json::object();
    std::vector<json> coefficients_;
    std::vector<std::pair<std::string, Field>> dumps_;
};

} // namespace halfheat::lab
