#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "mmfusion/error.hpp"
#include "mmfusion/harness.hpp"

namespace mmf {

std::string_view to_string(TableLayout l) {
  switch (l) {
    case TableLayout::Formats: return "formats";
    case TableLayout::Models: return "models";
    case TableLayout::Fusion: return "fusion";
    case TableLayout::Severity: return "severity";
  }
  return "formats";
}

TableLayout parse_table_layout(std::string_view s) {
  for (auto l : {TableLayout::Formats, TableLayout::Models, TableLayout::Fusion, TableLayout::Severity})
    if (s == to_string(l)) return l;
  throw ValidationError("unknown table layout '" + std::string(s) + "'");
}

namespace {

struct Cell {
  std::string group, row, column;
  std::optional<double> test, dev;
  bool test_best = false, dev_selected = false;
};

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : sep) + p;
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string head_label(const ModalityConfig& m) { return m.head == HeadChoice::MLP ? "MLP" : "SVM"; }

std::optional<double> pick(const std::map<std::string, MetricReport>& m, const char* split, bool use_mae) {
  auto it = m.find(split);
  if (it == m.end()) return std::nullopt;
  return use_mae ? it->second.mae : it->second.balanced_accuracy;
}

std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string shown(const std::optional<double>& v, bool use_mae) {
  if (!v) return "-";
  char buf[32];
  if (use_mae) std::snprintf(buf, sizeof buf, "%.3f", *v);
  else std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

Tables report_tables(std::span<const RunResult> results, TableLayout layout) {
  Tables t;
  if (results.empty()) return t;
  for (const auto& r : results)
    if (r.config.task != results.front().config.task)
      throw ValidationError("report_tables: results mix tasks " + std::string(to_string(results.front().config.task)) +
                            " and " + std::string(to_string(r.config.task)));
  const bool use_mae = layout == TableLayout::Severity;
  const std::string metric = use_mae ? "MAE" : "BA";

  std::vector<Cell> cells;
  std::vector<std::string> columns;
  auto add_column = [&](const std::string& c) {
    if (std::find(columns.begin(), columns.end(), c) == columns.end()) columns.push_back(c);
  };
  for (const auto& r : results) {
    const auto& c = r.config;
    std::vector<std::string> mods, formats, archs;
    for (const auto& m : c.modalities) {
      mods.push_back(capitalize(m.name));
      formats.push_back(m.format);
      archs.push_back(std::string(nn::to_string(m.model.architecture)));
    }
    Cell cell;
    cell.test = pick(r.metrics, "test", use_mae);
    cell.dev = pick(r.metrics, "dev", use_mae);
    const bool norm = !c.modalities.empty() && c.modalities.front().normalize;
    switch (layout) {
      case TableLayout::Formats:
        cell.group = join(mods, "+");
        cell.row = join(formats, "+") + " (" + head_label(c.modalities.front()) + ")";
        cell.column = norm ? metric + " (w/ norm)" : metric;
        break;
      case TableLayout::Models:
        cell.group = join(mods, "+");
        cell.row = join(formats, "+") + " / " + join(archs, "+") + " / " + head_label(c.modalities.front()) +
                   (norm ? " w/ norm" : "");
        cell.column = metric;
        break;
      case TableLayout::Fusion: {
        std::string g(to_string(c.fusion.kind));
        if (c.fusion.kind == FusionKind::FeatureLevel) g += " (" + std::string(to_string(c.fusion.mode)) + ")";
        if (c.fusion.include_llm) g += " + LLM";
        cell.group = g;
        std::vector<std::string> parts;
        for (std::size_t i = 0; i < c.modalities.size(); ++i)
          parts.push_back(mods[i] + " (" + formats[i] + (c.modalities[i].normalize ? " w/ norm" : "") + ")");
        cell.row = join(parts, ", ");
        cell.column = metric;
        break;
      }
      case TableLayout::Severity: {
        cell.group = std::string(to_string(c.task));
        std::string row = join(mods, "+") + " / " + std::string(to_string(c.fusion.kind));
        if (c.fusion.include_llm) row += " + LLM";
        cell.row = row;
        cell.column = metric;
        break;
      }
    }
    add_column(cell.column);
    cells.push_back(std::move(cell));
  }
  if (layout == TableLayout::Formats) {
    columns = {metric, metric + " (w/ norm)"};
  }

  // Best per group: Test-maximal (bold) and Dev-selected (dagger).
  auto better = [&](double a, double b) { return use_mae ? a < b : a > b; };
  std::map<std::string, std::size_t> best_test, best_dev;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (c.test) {
      auto it = best_test.find(c.group);
      if (it == best_test.end() || better(*c.test, *cells[it->second].test)) best_test[c.group] = i;
    }
    if (c.dev) {
      auto it = best_dev.find(c.group);
      if (it == best_dev.end() || better(*c.dev, *cells[it->second].dev)) best_dev[c.group] = i;
    }
  }
  for (const auto& [g, i] : best_test) cells[i].test_best = true;
  for (const auto& [g, i] : best_dev) cells[i].dev_selected = true;

  // Rows in first-seen order, grouped.
  std::vector<std::string> groups;
  std::map<std::string, std::vector<std::string>> rows;
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::size_t>> grid;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (std::find(groups.begin(), groups.end(), c.group) == groups.end()) groups.push_back(c.group);
    auto& rs = rows[c.group];
    if (std::find(rs.begin(), rs.end(), c.row) == rs.end()) rs.push_back(c.row);
    grid[{c.group, c.row}][c.column] = i;
  }

  const char* group_title = layout == TableLayout::Fusion ? "Fusion" : layout == TableLayout::Severity ? "Task" : "Modality";
  const char* row_title = layout == TableLayout::Formats ? "Format" : "Configuration";
  t.markdown = "| " + std::string(group_title) + " | " + row_title + " |";
  std::string rule = "|---|---|";
  for (const auto& col : columns) {
    t.markdown += " " + col + " |";
    rule += "---|";
  }
  t.markdown += "\n" + rule + "\n";
  for (const auto& g : groups) {
    bool first = true;
    for (const auto& row : rows[g]) {
      t.markdown += "| " + (first ? g : std::string()) + " | " + row + " |";
      first = false;
      const auto& line = grid[{g, row}];
      for (const auto& col : columns) {
        auto it = line.find(col);
        if (it == line.end()) {
          t.markdown += " - |";
          continue;
        }
        const auto& c = cells[it->second];
        std::string v = shown(c.test, use_mae);
        if (c.test_best) v = "**" + v + "**";
        if (c.dev_selected) v += " †";
        t.markdown += " " + v + " |";
      }
      t.markdown += "\n";
    }
  }
  t.markdown += "\nBold: best Test value in the group. †: configuration selected by Dev " + metric + ".\n";

  t.csv = "group,row,column,test,dev,test_best,dev_selected\n";
  for (const auto& c : cells) {
    t.csv += csv_field(c.group) + "," + csv_field(c.row) + "," + csv_field(c.column) + "," +
             (c.test ? full(*c.test) : "") + "," + (c.dev ? full(*c.dev) : "") + "," + (c.test_best ? "1" : "0") +
             "," + (c.dev_selected ? "1" : "0") + "\n";
  }
  return t;
}

}  // namespace mmf
