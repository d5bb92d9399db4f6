#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace hypo {

/// One named check. `measured` carries the headline value first; extra
/// diagnostics follow.
struct AuditEntry {
  std::string check;
  std::string anchor;
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<std::pair<std::string, double>> measured;
  double bound = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  double runtime_ms = 0.0;
  std::string note;

  AuditEntry& param(const std::string& k, const std::string& v) {
    params.emplace_back(k, v);
    return *this;
  }
  AuditEntry& param(const std::string& k, double v);
  AuditEntry& value(const std::string& k, double v) {
    measured.emplace_back(k, v);
    return *this;
  }
  double headline() const { return measured.empty() ? NAN : measured.front().second; }
  double get(const std::string& k) const {
    for (const auto& [name, v] : measured)
      if (name == k) return v;
    return NAN;
  }
};

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline AuditEntry& AuditEntry::param(const std::string& k, double v) { return param(k, fmt_double(v)); }

struct AuditReport {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<AuditEntry> entries;

  void meta(const std::string& k, const std::string& v) { metadata.emplace_back(k, v); }
  void add(AuditEntry e) { entries.push_back(std::move(e)); }
  void append(const AuditReport& other) {
    for (const auto& e : other.entries) entries.push_back(e);
  }
  bool all_pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }
  const AuditEntry* find(const std::string& check) const {
    for (const auto& e : entries)
      if (e.check == check) return &e;
    return nullptr;
  }
};

/// Key-value text: one `key = value` per line, entries separated by
/// `[entry]` headers. Stable field order.
inline std::string to_kv(const AuditReport& rep) {
  std::ostringstream os;
  os << "[report]\n";
  for (const auto& [k, v] : rep.metadata) os << k << " = " << v << "\n";
  os << "entries = " << rep.entries.size() << "\n";
  os << "all_pass = " << (rep.all_pass() ? "true" : "false") << "\n";
  for (const auto& e : rep.entries) {
    os << "\n[entry]\n";
    os << "check = " << e.check << "\n";
    os << "anchor = " << e.anchor << "\n";
    for (const auto& [k, v] : e.params) os << "param." << k << " = " << v << "\n";
    for (const auto& [k, v] : e.measured) os << "measured." << k << " = " << fmt_double(v) << "\n";
    os << "bound = " << fmt_double(e.bound) << "\n";
    os << "tolerance = " << fmt_double(e.tolerance) << "\n";
    os << "pass = " << (e.pass ? "true" : "false") << "\n";
    if (!e.note.empty()) os << "note = " << e.note << "\n";
    os << "runtime_ms = " << fmt_double(e.runtime_ms) << "\n";
  }
  return os.str();
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// One row per entry; params and extra measurements are packed as k=v;k=v.
inline std::string to_csv(const AuditReport& rep) {
  std::ostringstream os;
  os << "check,anchor,params,value,measured,bound,tolerance,pass,note,runtime_ms\n";
  for (const auto& e : rep.entries) {
    std::string params, meas;
    for (const auto& [k, v] : e.params) params += (params.empty() ? "" : ";") + k + "=" + v;
    for (const auto& [k, v] : e.measured) meas += (meas.empty() ? "" : ";") + k + "=" + fmt_double(v);
    os << csv_quote(e.check) << "," << csv_quote(e.anchor) << "," << csv_quote(params) << ","
       << fmt_double(e.headline()) << "," << csv_quote(meas) << "," << fmt_double(e.bound) << ","
       << fmt_double(e.tolerance) << "," << (e.pass ? "true" : "false") << "," << csv_quote(e.note)
       << "," << fmt_double(e.runtime_ms) << "\n";
  }
  return os.str();
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace hypo
