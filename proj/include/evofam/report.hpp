#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

namespace evofam {

inline constexpr const char* format_version = "evofam-report/1";
inline constexpr std::uint64_t default_seed = 0xE70F;

/// Configuration hashes are rendered as 16 lowercase hex digits.
inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

enum class CheckKind {
    /// pass ⇔ residual ≤ tolerance (and residual finite)
    thresholded,
    /// cannot fail at finite truncation; pass with an explanatory note
    structural,
    /// recorded only, never part of the verdict
    measurement,
};

inline const char* to_string(CheckKind k) {
    switch (k) {
        case CheckKind::thresholded: return "thresholded";
        case CheckKind::structural: return "structural";
        case CheckKind::measurement: return "measurement";
    }
    return "?";
}

struct CheckEntry {
    double residual = 0.0;
    std::optional<double> tolerance;
    bool pass = true;
    CheckKind kind = CheckKind::thresholded;
    std::string notes;
};

struct ReportMeta {
    std::uint64_t config_hash = 0;
    int modes = 0;
    int intervals = 0;
    double horizon = 0.0;
    std::uint64_t seed = default_seed;
};

/// Named residuals with verdicts. Entries are keyed and ordered by name, so serialization does not
/// depend on the order in which checks were run.
class InvariantReport {
public:
    ReportMeta meta;

    /// Adds a thresholded check; non-finite residuals fail.
    void add(const std::string& name, double residual, double tolerance, std::string notes = {}) {
        CheckEntry e;
        e.residual = residual;
        e.tolerance = tolerance;
        e.pass = std::isfinite(residual) && residual <= tolerance;
        e.notes = std::move(notes);
        entries_[name] = std::move(e);
    }

    void add_structural(const std::string& name, std::string notes) {
        CheckEntry e;
        e.kind = CheckKind::structural;
        e.notes = std::move(notes);
        entries_[name] = std::move(e);
    }

    void add_measurement(const std::string& name, double value, std::string notes = {}) {
        CheckEntry e;
        e.kind = CheckKind::measurement;
        e.residual = value;
        e.notes = std::move(notes);
        entries_[name] = std::move(e);
    }

    void insert(const std::string& name, CheckEntry entry) { entries_[name] = std::move(entry); }

    /// Copies every entry of `other` under `prefix`.
    void merge(const InvariantReport& other, const std::string& prefix = {}) {
        for (const auto& [name, e] : other.entries_) entries_[prefix + name] = e;
    }

    const std::map<std::string, CheckEntry>& entries() const { return entries_; }
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    const CheckEntry& at(const std::string& name) const { return entries_.at(name); }
    double residual(const std::string& name) const { return at(name).residual; }

    bool all_pass() const {
        for (const auto& [name, e] : entries_) {
            if (e.kind == CheckKind::thresholded && !e.pass) return false;
        }
        return true;
    }

    std::size_t failure_count() const {
        std::size_t k = 0;
        for (const auto& [name, e] : entries_) k += (e.kind == CheckKind::thresholded && !e.pass);
        return k;
    }

    /// {name: {residual, tolerance, pass, kind, notes}}. Non-finite residuals serialize as strings.
    nlohmann::json checks_json() const {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [name, e] : entries_) {
            nlohmann::json j;
            j["residual"] = number_json(e.residual);
            j["tolerance"] = e.tolerance ? number_json(*e.tolerance) : nlohmann::json(nullptr);
            j["pass"] = e.pass;
            j["kind"] = to_string(e.kind);
            j["notes"] = e.notes;
            out[name] = std::move(j);
        }
        return out;
    }

    nlohmann::json meta_json() const {
        return {{"config_hash", hash_hex(meta.config_hash)}, {"N", meta.modes},      {"M", meta.intervals},
                {"T", meta.horizon},   {"seed", meta.seed},    {"format_version", format_version}};
    }

    nlohmann::json to_json() const { return {{"meta", meta_json()}, {"checks", checks_json()}}; }

    static nlohmann::json number_json(double v) {
        if (std::isfinite(v)) return v;
        if (std::isnan(v)) return "nan";
        return v > 0 ? "inf" : "-inf";
    }

private:
    std::map<std::string, CheckEntry> entries_;
};

}  // namespace evofam
