#pragma once

// Perturbation report: three metrics (all / connection-related /
// buffer-related syscalls perturbed) by three threshold modes (static 10%,
// static 50%, dynamic), one row per archetype or per syscall category.

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "uncertain/config.hpp"
#include "uncertain/strategy_engine.hpp"
#include "uncertain/trace_io.hpp"

namespace uncertain {

enum class Grouping : std::uint8_t { kByArchetype, kByCategory };

inline constexpr const char* kModeStatic10 = "static_10";
inline constexpr const char* kModeStatic50 = "static_50";
inline constexpr const char* kModeDynamic = "dynamic";

inline std::string mode_label(const PolicyConfig& c) {
  if (c.is_dynamic()) return kModeDynamic;
  char buf[32];
  std::snprintf(buf, sizeof buf, "static_%g", *c.static_threshold * 100.0);
  return buf;
}

struct ReportEntry {
  std::string group;
  std::string mode;
  PerturbationStats stats;
};

struct Report {
  OrderedJson json;
  std::string text;
};

namespace report_detail {

inline std::string percent(const RateCounter& r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", r.rate() * 100.0);
  return buf;
}

inline std::string mode_heading(const std::string& mode) {
  if (mode == kModeStatic10) return "10%";
  if (mode == kModeStatic50) return "50%";
  if (mode == kModeDynamic) return "Dynamic";
  return mode;
}

struct Row {
  std::string group;
  // mode -> {all, connection, buffer}
  std::map<std::string, std::array<RateCounter, 3>> cells;
};

}  // namespace report_detail

inline std::string to_string(Grouping g) {
  return g == Grouping::kByArchetype ? "byArchetype" : "byCategory";
}

inline Report render_report(const std::vector<ReportEntry>& entries, Grouping grouping) {
  using report_detail::Row;
  std::vector<std::string> modes{kModeStatic10, kModeStatic50, kModeDynamic};
  for (const auto& e : entries) {
    if (std::find(modes.begin(), modes.end(), e.mode) == modes.end()) modes.push_back(e.mode);
  }
  std::sort(modes.begin() + 3, modes.end());

  std::map<std::string, std::map<std::string, PerturbationStats>> by_group;  // group -> mode
  std::map<std::string, PerturbationStats> totals;                           // mode
  for (const auto& e : entries) {
    by_group[e.group][e.mode] += e.stats;
    totals[e.mode] += e.stats;
  }

  std::vector<Row> rows;
  auto metrics_of = [](const PerturbationStats& s) {
    return std::array<RateCounter, 3>{s.all, s.connection, s.buffer};
  };
  if (grouping == Grouping::kByArchetype) {
    for (const auto& [group, per_mode] : by_group) {
      Row r{group, {}};
      for (const auto& m : modes) {
        const auto it = per_mode.find(m);
        r.cells[m] = it == per_mode.end() ? std::array<RateCounter, 3>{} : metrics_of(it->second);
      }
      rows.push_back(std::move(r));
    }
  } else {
    for (std::size_t c = 0; c < 3; ++c) {
      const auto cat = static_cast<SyscallCategory>(c);
      Row r{std::string(to_string(cat)), {}};
      for (const auto& m : modes) {
        const auto it = totals.find(m);
        const PerturbationStats s = it == totals.end() ? PerturbationStats{} : it->second;
        const RateCounter conn = cat == SyscallCategory::kNetwork ? s.by_category[c] : RateCounter{};
        r.cells[m] = {s.by_category[c], conn, s.buffer_by_category[c]};
      }
      rows.push_back(std::move(r));
    }
  }
  Row total{"total", {}};
  for (const auto& m : modes) {
    const auto it = totals.find(m);
    total.cells[m] = it == totals.end() ? std::array<RateCounter, 3>{} : metrics_of(it->second);
  }
  rows.push_back(std::move(total));

  static const std::array<const char*, 3> kMetrics{"all", "connection", "buffer"};
  static const std::array<const char*, 3> kMetricTitles{
      "All syscalls perturbed", "Connection-related perturbed", "Buffer-related perturbed"};

  Report rep;
  rep.json["report"] = "perturbation";
  rep.json["grouping"] = to_string(grouping);
  rep.json["modes"] = modes;
  rep.json["metrics"] = {"all", "connection", "buffer"};
  auto jrows = OrderedJson::array();
  for (const auto& r : rows) {
    OrderedJson jr;
    jr["group"] = r.group;
    OrderedJson cells;
    for (const auto& m : modes) {
      OrderedJson cell;
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& rc = r.cells.at(m)[k];
        cell[kMetrics[k]] = {{"total", rc.total},
                             {"perturbed", rc.perturbed},
                             {"percent", rc.rate() * 100.0}};
      }
      cells[m] = cell;
    }
    jr["cells"] = cells;
    jrows.push_back(jr);
  }
  rep.json["rows"] = jrows;

  // Aligned text.
  std::size_t group_w = 5;
  for (const auto& r : rows) group_w = std::max(group_w, r.group.size());
  constexpr std::size_t kCellW = 10;
  const std::size_t block_w = modes.size() * kCellW;
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(group_w)) << "Group";
  for (const auto* title : kMetricTitles) {
    std::string t = title;
    if (t.size() > block_w) t.resize(block_w);
    out << " | " << std::setw(static_cast<int>(block_w)) << t;
  }
  out << '\n' << std::setw(static_cast<int>(group_w)) << "";
  for (std::size_t k = 0; k < 3; ++k) {
    out << " | ";
    for (const auto& m : modes) {
      out << std::right << std::setw(static_cast<int>(kCellW)) << report_detail::mode_heading(m);
    }
    out << std::left;
  }
  out << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(group_w)) << r.group;
    for (std::size_t k = 0; k < 3; ++k) {
      out << " | ";
      for (const auto& m : modes) {
        out << std::right << std::setw(static_cast<int>(kCellW))
            << report_detail::percent(r.cells.at(m)[k]);
      }
      out << std::left;
    }
    out << '\n';
  }
  rep.text = out.str();
  return rep;
}

}  // namespace uncertain
